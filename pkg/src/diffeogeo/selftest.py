"""Quick battery of closed-form cases from every module."""
from __future__ import annotations

import numpy as np

from . import curvature as cv
from . import euler_arnold as ea
from . import hunter_saxton as hs
from . import landmarks as lm
from .exceptions import OrderTooLow
from .kernels import KernelSpec, kernel_eval, kernel_grad
from .matching import MatchProblem, match


def _close(a, b, tol):
    return bool(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))) <= tol)


def _kernels():
    k = KernelSpec("gaussian", 1.0)
    return (
        _close(kernel_eval(k, np.zeros(2)), 1.0, 0)
        and _close(kernel_grad(k, np.zeros(2)), 0.0, 0)
        and _close(kernel_eval(k, np.array([1.0])), np.exp(-0.5), 1e-15)
    )


def _landmarks():
    k = KernelSpec("gaussian", 1.0)
    q = np.array([[0.0], [1.0]])
    ok = _close(lm.cometric(k, q, [[1.0], [0.0]], [[0.0], [1.0]]), np.exp(-0.5), 1e-15)
    path = lm.shoot(k, (np.zeros((1, 2)), np.array([[1.0, 0.0]])), T=1.0, dt=1e-2)
    ok &= _close(path.q[-1], [[1.0, 0.0]], 1e-12)
    dq, da = lm.hamiltonian_rhs(k, np.zeros((1, 2)), np.array([[1.0, 2.0]]))
    return ok and _close(da, 0.0, 0) and _close(dq, [[1.0, 2.0]], 0)


def _curvature():
    k = KernelSpec("gaussian", 1.0)
    q = np.array([[0.3, -0.2]])
    rep = cv.sectional_numerator(k, q, [[1.0, 0.0]], [[0.0, 1.0]])
    q2 = np.array([[0.0], [1.5]])
    a = np.array([[1.0], [0.5]])
    rep2 = cv.sectional_numerator(k, q2, a, a)
    return _close(rep.numerator, 0.0, 1e-14) and _close(rep2.numerator, 0.0, 1e-12)


def _matching():
    k = KernelSpec("gaussian", 1.0)
    q0 = np.array([[0.0, 0.0]])
    res = match(MatchProblem(q0, q0 + [[0.5, -0.25]], kernel=k))
    res0 = match(MatchProblem(np.array([[0.0], [2.0]]), np.array([[0.0], [2.0]]), kernel=k))
    return _close(res.alpha0, [[0.5, -0.25]], 1e-15) and _close(res0.alpha0, 0.0, 0)


def _hunter_saxton():
    g = hs.LineGrid(-10, 10, 256)
    ident = hs.DiffLine.identity(g)
    ok = _close(hs.r_map(ident).gamma, 0.0, 0)
    plateau = np.where(np.abs(g.x) < 2, 3.0, 0.0)
    ok &= _close(hs.r_map(hs.DiffLine.from_derivative(g, plateau)).gamma[np.abs(g.x) < 2], 2.0, 1e-15)
    ok &= _close(hs.hs_pde_rhs(np.zeros(g.M), g), 0.0, 0)
    return ok and hs.hs_distance(ident, ident) == 0.0


def _euler_arnold():
    M = 32
    x = ea.grid(M)
    op1 = ea.InertiaOp(1.0, M)
    ok = _close(ea.inertia_apply(op1, np.cos(x)), 2 * np.cos(x), 1e-13)
    ok &= _close(ea.metric_at_id(ea.InertiaOp(0.0, M), np.cos(x), np.cos(x)), 0.5, 1e-15)
    ok &= _close(ea.ad_star(np.cos(x), np.cos(x)), -1.5 * np.sin(2 * x), 1e-13)
    ok &= _close(ea.ea_rhs(ea.InertiaOp(0.0, M), np.cos(x)), 1.5 * np.sin(2 * x), 1e-13)
    try:
        ea.arnold_numerator_id(ea.InertiaOp(0.25, M), np.cos(x), np.sin(x))
        ok = False
    except OrderTooLow:
        pass
    return ok


CHECKS = {
    "kernels": _kernels,
    "landmark_dynamics": _landmarks,
    "landmark_curvature": _curvature,
    "lddmm_matching": _matching,
    "hunter_saxton": _hunter_saxton,
    "euler_arnold_1d": _euler_arnold,
}


def run_selftest():
    """Run every check; returns ``{name: passed}``."""
    results = {}
    for name, fn in CHECKS.items():
        try:
            results[name] = bool(fn())
        except Exception:  # a crash counts as a failure
            results[name] = False
    return results
