"""Stress, force and sectional curvature of landmark space.

Covectors ``alpha``, ``beta`` are constant 1-forms on ``(R^n)^N``; their
sharps ``alpha^sharp = K(q) alpha`` are the corresponding vector fields.
The curvature numerator is assembled from stress and force terms and can
be checked against ``riemann_fd_oracle``, which differentiates the metric
matrix numerically and never touches the stress/force algebra.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IllConditioned
from .kernels import (
    as_kernel,
    check_landmarks,
    kernel_grad,
    kernel_hess,
    kernel_matrix,
    pairwise_differences,
)
from .landmarks import cometric, flat, metric, sharp

DENOMINATOR_TOL = 1e-12
RICHARDSON_TOL = 1e-2


@dataclass
class CurvatureReport:
    numerator: float
    denominator: float
    terms: dict = field(default_factory=dict)

    @property
    def sectional(self):
        """``numerator / denominator``, or None for a degenerate plane."""
        if self.denominator > DENOMINATOR_TOL:
            return self.numerator / self.denominator
        return None

    def to_dict(self):
        return {
            "numerator": self.numerator,
            "denominator": self.denominator,
            "sectional": self.sectional,
            "terms": dict(self.terms),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _setup(k, q, *covectors):
    k = as_kernel(k)
    q = check_landmarks(q, k)
    out = [np.asarray(c, dtype=float).reshape(q.shape) for c in covectors]
    return k, q, out


def stress(k, q, alpha, beta):
    """``D(alpha, beta)_i = sum_j <grad K(q_i - q_j), a_i - a_j> beta_j`` with ``a = alpha^sharp``.

    This is the derivative of the field ``beta^sharp`` in the direction
    ``alpha^sharp``.
    """
    k, q, (alpha, beta) = _setup(k, q, alpha, beta)
    G = kernel_grad(k, pairwise_differences(q))
    a = kernel_matrix(k, q, check=False) @ alpha
    A = a[:, None, :] - a[None, :, :]
    return np.einsum("ijc,ijc,jd->id", G, A, beta)


def force(k, q, alpha, beta):
    """``F(alpha, beta)_i = 1/2 sum_k grad K(q_i - q_k) (<alpha_i, beta_k> + <beta_i, alpha_k>)``.

    Half the q-gradient of ``cometric(q, alpha, beta)``.
    """
    k, q, (alpha, beta) = _setup(k, q, alpha, beta)
    G = kernel_grad(k, pairwise_differences(q))
    S = 0.5 * (alpha @ beta.T + beta @ alpha.T)
    return np.einsum("ikc,ik->ic", G, S)


def sharp_jacobian(k, q, alpha):
    """Jacobian of the vector field ``q -> K(q) alpha`` as an ``(Nn, Nn)`` matrix."""
    k, q, (alpha,) = _setup(k, q, alpha)
    N, n = q.shape
    G = kernel_grad(k, pairwise_differences(q))  # (N, N, n)
    J = np.zeros((N, n, N, n))
    # d/dq_m of sum_j K(q_i - q_j) alpha_j = sum_j alpha_j grad K(q_i - q_j)^T (delta_im - delta_jm)
    J += np.einsum("ja,ijb,im->iamb", alpha, G, np.eye(N))
    J -= np.einsum("ma,imb->iamb", alpha, G)
    return J.reshape(N * n, N * n)


def lie_bracket(k, q, alpha, beta):
    """``[alpha^sharp, beta^sharp] = D(beta^sharp) alpha^sharp - D(alpha^sharp) beta^sharp``.

    Built from the analytic Jacobians of the sharp fields, independently of
    ``stress``.
    """
    k, q, (alpha, beta) = _setup(k, q, alpha, beta)
    X = sharp(k, q, alpha).ravel()
    Y = sharp(k, q, beta).ravel()
    b = sharp_jacobian(k, q, beta) @ X - sharp_jacobian(k, q, alpha) @ Y
    return b.reshape(q.shape)


def _d2K_terms(k, q, alpha, beta):
    Kq = kernel_matrix(k, q, check=False)
    H = kernel_hess(k, pairwise_differences(q))
    a, b = Kq @ alpha, Kq @ beta
    A = a[:, None, :] - a[None, :, :]
    B = b[:, None, :] - b[None, :, :]
    HBB = np.einsum("ijc,ijcd,ijd->ij", B, H, B)
    HBA = np.einsum("ijc,ijcd,ijd->ij", B, H, A)
    HAA = np.einsum("ijc,ijcd,ijd->ij", A, H, A)
    total = HBB * (alpha @ alpha.T) - 2.0 * HBA * (beta @ alpha.T) + HAA * (beta @ beta.T)
    return -0.5 * float(total.sum())


def sectional_numerator(k, q, alpha, beta) -> CurvatureReport:
    """Curvature numerator ``g(R(X, Y)Y, X)`` for ``X = alpha^sharp``, ``Y = beta^sharp``.

    The four named terms sum to ``g(R(X, Y)X, Y)``, which is minus the
    numerator for ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``; the
    reported ``numerator`` is positive on round spheres. Pairings
    ``<D, F>`` are the duality sum ``sum_i <D_i, F_i>``.
    """
    k, q, (alpha, beta) = _setup(k, q, alpha, beta)
    Dab = stress(k, q, alpha, beta)
    Dba = stress(k, q, beta, alpha)
    Daa = stress(k, q, alpha, alpha)
    Dbb = stress(k, q, beta, beta)
    Fab = force(k, q, alpha, beta)
    Faa = force(k, q, alpha, alpha)
    Fbb = force(k, q, beta, beta)

    stress_force = float(np.sum((Dab + Dba) * Fab) - np.sum(Daa * Fbb) - np.sum(Dbb * Faa))
    d2K = _d2K_terms(k, q, alpha, beta)
    force_norm = -cometric(k, q, Fab, Fab) + cometric(k, q, Faa, Fbb)
    br = lie_bracket(k, q, alpha, beta)
    oneill = 0.75 * metric(k, q, br, br)

    terms = {
        "stress_force_terms": stress_force,
        "d2K_terms": d2K,
        "force_norm_terms": force_norm,
        "oneill_term": oneill,
    }
    num = -(stress_force + d2K + force_norm + oneill)
    aa = cometric(k, q, alpha, alpha)
    bb = cometric(k, q, beta, beta)
    ab = cometric(k, q, alpha, beta)
    return CurvatureReport(numerator=float(num), denominator=float(aa * bb - ab * ab), terms=terms)


def sectional_curvature_tangent(k, q, P1, P2) -> CurvatureReport:
    """Same as ``sectional_numerator`` but for tangent vectors ``P1``, ``P2``."""
    return sectional_numerator(k, q, flat(k, q, P1), flat(k, q, P2))


def _metric_tensor(k, z, shape):
    N, n = shape
    Kinv = np.linalg.inv(kernel_matrix(k, z.reshape(shape), check=False))
    return np.kron(Kinv, np.eye(n))


def riemann_from_metric(metric_fn, z, X, Y, h):
    """``g(R(X, Y)Y, X)`` from central differences of a coordinate metric ``metric_fn(z)``.

    Generic in the chart; used for the landmark oracle and for sanity checks
    on model spaces.
    """
    z = np.asarray(z, dtype=float)
    d = z.size
    E = np.eye(d)
    g = metric_fn(z)
    dg = np.empty((d, d, d))  # dg[c] = d_c g
    for c in range(d):
        dg[c] = (metric_fn(z + h * E[c]) - metric_fn(z - h * E[c])) / (2 * h)
    ddg = np.empty((d, d, d, d))  # ddg[c, e] = d_c d_e g
    for c in range(d):
        ddg[c, c] = (metric_fn(z + h * E[c]) - 2 * g + metric_fn(z - h * E[c])) / h**2
        for e in range(c + 1, d):
            v = (
                metric_fn(z + h * (E[c] + E[e]))
                - metric_fn(z + h * (E[c] - E[e]))
                - metric_fn(z - h * (E[c] - E[e]))
                + metric_fn(z - h * (E[c] + E[e]))
            ) / (4 * h**2)
            ddg[c, e] = ddg[e, c] = v
    # first-kind Christoffel symbols Gam_low[f, a, b] = 1/2 (d_a g_fb + d_b g_fa - d_f g_ab)
    gam_low = 0.5 * (
        np.einsum("afb->fab", dg) + np.einsum("bfa->fab", dg) - np.einsum("fab->fab", dg)
    )
    gam = np.linalg.solve(g, gam_low.reshape(d, -1)).reshape(d, d, d)  # Gam^e_ab
    # R_abcd = 1/2 (g_ad,bc + g_bc,ad - g_ac,bd - g_bd,ac) + g_ef (Gam^e_bc Gam^f_ad - Gam^e_bd Gam^f_ac)
    # ddg[c, e, a, b] = d_c d_e g_ab
    R = 0.5 * (
        np.einsum("bcad->abcd", ddg)
        + np.einsum("adbc->abcd", ddg)
        - np.einsum("bdac->abcd", ddg)
        - np.einsum("acbd->abcd", ddg)
    )
    R += np.einsum("ef,ebc,fad->abcd", g, gam, gam) - np.einsum("ef,ebd,fac->abcd", g, gam, gam)
    # R_abcd X^a Y^b X^c Y^d = g(R(X,Y)Y,X), +1 * area^2 on the unit sphere
    return float(np.einsum("abcd,a,b,c,d->", R, X, Y, X, Y))


def riemann_fd_oracle(k, q, P1, P2, h=None, return_error=False):
    """Finite-difference curvature numerator ``g(R(P1, P2)P2, P1)`` on landmark space.

    The metric matrix ``K(q)^{-1}`` (blockwise on ``R^n``) is differentiated
    by central differences with step ``h`` and ``h/2``; the Richardson
    extrapolant is returned. Raises IllConditioned if the two steps disagree
    by more than ``RICHARDSON_TOL`` relative.
    """
    k = as_kernel(k)
    q = check_landmarks(q, k)
    P1 = np.asarray(P1, dtype=float).reshape(q.shape).ravel()
    P2 = np.asarray(P2, dtype=float).reshape(q.shape).ravel()
    if q.shape[0] == 1:
        return (0.0, 0.0) if return_error else 0.0
    if h is None:
        diam = float(np.max(np.linalg.norm(pairwise_differences(q), axis=-1)))
        h = 1e-4 * max(diam, k.sigma)

    def fn(z):
        return _metric_tensor(k, z, q.shape)

    z = q.ravel()
    r1 = riemann_from_metric(fn, z, P1, P2, h)
    r2 = riemann_from_metric(fn, z, P1, P2, h / 2)
    val = (4 * r2 - r1) / 3
    scale = metric(k, q, P1.reshape(q.shape), P1.reshape(q.shape)) * metric(
        k, q, P2.reshape(q.shape), P2.reshape(q.shape)
    ) / k.sigma**2
    err = abs(r1 - r2) / max(abs(val), 1e-8 * scale, 1e-300)
    if err > RICHARDSON_TOL:
        raise IllConditioned("Richardson disagreement too large", disagreement=err, h=h)
    return (val, err) if return_error else val
