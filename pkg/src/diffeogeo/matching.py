"""Landmark matching by geodesic shooting.

Exact mode solves ``endpoint(q0, alpha0) = q1``; inexact mode minimizes
``energy(q0, alpha0) + lam * |endpoint(q0, alpha0) - q1|^2``. Both use
damped Gauss-Newton with central finite-difference Jacobians; exact mode
falls back to continuation in the target when the direct solve stalls.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import NotConverged
from .kernels import KernelSpec, as_kernel, check_landmarks, kernel_matrix
from .landmarks import INTEGRATORS, energy, flat, flow_points, shoot

MODES = ("exact", "inexact")


@dataclass
class MatchProblem:
    q0: np.ndarray
    q1: np.ndarray
    kernel: KernelSpec = field(default_factory=KernelSpec)
    mode: str = "exact"
    lam: float = 1.0
    dt: float = 0.01
    integrator: str = "rk4"
    max_iter: int = 200
    tol: float = 1e-10

    def __post_init__(self):
        self.kernel = as_kernel(self.kernel)
        self.q0 = check_landmarks(self.q0, self.kernel, copy=True)
        self.q1 = check_landmarks(self.q1, copy=True)
        if self.q0.shape != self.q1.shape:
            raise ValueError(f"q0 and q1 shapes differ: {self.q0.shape} vs {self.q1.shape}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "inexact" and not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def T(self):
        return 1.0


@dataclass
class MatchResult:
    alpha0: np.ndarray
    endpoint_error: float
    path_energy: float
    iterations: int
    converged: bool
    q_end: np.ndarray | None = None

    def to_dict(self):
        return {
            "alpha0": np.asarray(self.alpha0).tolist(),
            "endpoint_error": float(self.endpoint_error),
            "path_energy": float(self.path_energy),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "q_end": None if self.q_end is None else np.asarray(self.q_end).tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def endpoint(k, q0, alpha0, dt=0.01, integrator="rk4"):
    """Landmark positions at ``t = 1`` on the geodesic with initial momentum ``alpha0``."""
    path = shoot(k, (q0, alpha0), T=1.0, dt=dt, integrator=integrator)
    if path.error is not None:
        return None
    return path.q[-1]


def endpoint_error(q_end, q1):
    """Largest landmark displacement ``max_i |q_end_i - q1_i|``."""
    if q_end is None:
        return np.inf
    return float(np.max(np.linalg.norm(q_end - q1, axis=-1)))


def _residual(prob, alpha, chol):
    q_end = endpoint(prob.kernel, prob.q0, alpha.reshape(prob.q0.shape), prob.dt, prob.integrator)
    if q_end is None:
        return None, None
    e = (q_end - prob.q1).ravel()
    if prob.mode == "exact":
        return e, q_end
    # |r|^2 = 2 (energy + lam |e|^2)
    reg = (chol.T @ alpha.reshape(prob.q0.shape)).ravel()
    return np.concatenate([reg, np.sqrt(2.0 * prob.lam) * e]), q_end


def _fd_jacobian(prob, alpha, chol, h):
    cols = []
    for j in range(alpha.size):
        ap, am = alpha.copy(), alpha.copy()
        ap[j] += h
        am[j] -= h
        rp, _ = _residual(prob, ap, chol)
        rm, _ = _residual(prob, am, chol)
        if rp is None or rm is None:
            return None
        cols.append((rp - rm) / (2 * h))
    return np.column_stack(cols)


def _gauss_newton(prob, alpha, chol):
    """Damped Gauss-Newton from ``alpha``; returns ``(alpha, q_end, iterations, converged)``."""

    def objective(r):
        return np.inf if r is None else float(r @ r)

    r, q_end = _residual(prob, alpha, chol)
    f = objective(r)
    it = 0
    converged = False
    stalled = False
    while True:
        err = endpoint_error(q_end, prob.q1)
        if prob.mode == "exact" and err <= prob.tol:
            converged = True
            break
        if it >= prob.max_iter:
            break
        h = 1e-6 * max(1.0, float(np.max(np.abs(alpha))))
        J = _fd_jacobian(prob, alpha, chol, h)
        if J is None:
            stalled = True
            break
        step = -np.linalg.lstsq(J, r, rcond=None)[0]
        t = 1.0
        accepted = False
        while t > 1e-10:
            a_new = alpha + t * step
            r_new, q_new = _residual(prob, a_new, chol)
            f_new = objective(r_new)
            if f_new < f:
                accepted = True
                break
            t *= 0.5
        it += 1
        if not accepted:
            stalled = True
            break
        small = np.linalg.norm(t * step) <= prob.tol * (1.0 + np.linalg.norm(alpha))
        flat_obj = f - f_new <= 1e-14 * f
        alpha, r, q_end, f = a_new, r_new, q_new, f_new
        if prob.mode == "inexact" and (small or flat_obj):
            converged = True
            break
    if stalled and prob.mode == "inexact":
        # no descent direction left: a stationary point within FD accuracy
        converged = np.isfinite(f)
    return alpha, q_end, it, converged


def _continuation(prob, chol, stages):
    """Exact matching along targets ``q0 + (j / stages) (q1 - q0)``, warm-started stage to stage."""
    q0, d = prob.q0, prob.q1 - prob.q0
    alpha = flat(prob.kernel, q0, d / stages).ravel()
    total = 0
    q_end = None
    for j in range(1, stages + 1):
        last = j == stages
        sub = replace(prob, q1=q0 + (j / stages) * d, tol=prob.tol if last else max(prob.tol, 1e-6))
        if j > 1:
            alpha = alpha * j / (j - 1)  # linear predictor, exact for a single landmark
        alpha, q_end, it, ok = _gauss_newton(sub, alpha, chol)
        total += it
        if not ok:
            return alpha, q_end, total, False
    return alpha, q_end, total, True


CONTINUATION_STAGES = (4, 16)


def match(prob: MatchProblem) -> MatchResult:
    """Solve a MatchProblem. Raises NotConverged (carrying ``.result``) on failure.

    Exact mode starts Gauss-Newton from ``flat(q1 - q0)``; if that stalls
    (typically when landmarks must pass each other) it retries by
    continuation in the target.
    """
    k = prob.kernel
    q0, q1 = prob.q0, prob.q1
    chol = linalg.cholesky(kernel_matrix(k, q0), lower=True)
    alpha = flat(k, q0, q1 - q0).ravel()
    alpha, q_end, it, converged = _gauss_newton(prob, alpha, chol)
    if not converged and prob.mode == "exact":
        for stages in CONTINUATION_STAGES:
            a, qe, n, ok = _continuation(prob, chol, stages)
            it += n
            if ok:
                alpha, q_end, converged = a, qe, True
                break

    alpha0 = alpha.reshape(q0.shape)
    result = MatchResult(
        alpha0=alpha0,
        endpoint_error=endpoint_error(q_end, q1),
        path_energy=energy(k, q0, alpha0),
        iterations=it,
        converged=bool(converged),
        q_end=q_end,
    )
    if not converged:
        raise NotConverged(
            "matching did not converge",
            result=result,
            iterations=it,
            endpoint_error=result.endpoint_error,
        )
    return result


def _n_threads():
    try:
        return max(1, int(os.environ.get("DIFFEOGEO_THREADS", "1")))
    except ValueError:
        return 1


def match_batch(problems, n_threads=None):
    """Run independent problems concurrently; failures come back as NotConverged instances."""
    n_threads = n_threads or _n_threads()

    def run(p):
        try:
            return match(p)
        except NotConverged as exc:
            return exc

    if n_threads == 1:
        return [run(p) for p in problems]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(run, problems))


class LandmarkMatcher(BaseEstimator, TransformerMixin):
    """Fit a geodesic from source landmarks ``X`` to targets ``y``; transform carries points along it.

    Parameters
    ----------
    kernel : str
        Kernel family.
    sigma : float
        Kernel width.
    mode : {"exact", "inexact"}
    lam : float
        Data weight in inexact mode.
    dt : float
        Integration step.
    max_iter : int
    tol : float

    Attributes
    ----------
    alpha0_ : ndarray of shape (N, n)
    endpoint_error_ : float
    path_energy_ : float
    n_iter_ : int
    converged_ : bool
    """

    def __init__(
        self,
        kernel="gaussian",
        sigma=1.0,
        mode="exact",
        lam=1.0,
        dt=0.01,
        max_iter=200,
        tol=1e-10,
    ):
        self.kernel = kernel
        self.sigma = sigma
        self.mode = mode
        self.lam = lam
        self.dt = dt
        self.max_iter = max_iter
        self.tol = tol

    def _problem(self, X, y):
        return MatchProblem(
            q0=X,
            q1=y,
            kernel=KernelSpec(self.kernel, self.sigma),
            mode=self.mode,
            lam=self.lam,
            dt=self.dt,
            max_iter=self.max_iter,
            tol=self.tol,
        )

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        prob = self._problem(X, y)
        try:
            res = match(prob)
        except NotConverged as exc:
            res = exc.result
        self.q0_ = prob.q0
        self.alpha0_ = res.alpha0
        self.endpoint_error_ = res.endpoint_error
        self.path_energy_ = res.path_energy
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.n_features_in_ = X.shape[1]
        return self

    def geodesic(self):
        check_is_fitted(self, "alpha0_")
        return shoot(KernelSpec(self.kernel, self.sigma), (self.q0_, self.alpha0_), 1.0, self.dt)

    def transform(self, X):
        """Image of the points ``X`` under the time-1 flow of the fitted geodesic."""
        check_is_fitted(self, "alpha0_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return flow_points(self.geodesic(), X)
