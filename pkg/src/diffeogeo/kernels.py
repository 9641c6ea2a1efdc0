"""Translation-invariant scalar kernels and landmark kernel matrices.

A kernel ``K(r) = k(|r|)`` acts blockwise on ``R^n`` vectors, so an
``N x N`` scalar matrix ``K(q)_ij = K(q_i - q_j)`` defines the cometric on
landmark space. All functions broadcast over leading axes of ``r``:
``r`` of shape ``(..., n)`` gives values ``(...)``, gradients ``(..., n)``
and Hessians ``(..., n, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.utils.validation import check_array

from .exceptions import DegenerateConfig

FAMILIES = ("gaussian", "matern_3_2", "matern_5_2")

# minimum landmark separation, in units of sigma
MIN_SEPARATION = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    family: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def to_dict(self):
        return {"family": self.family, "sigma": float(self.sigma)}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"family", "sigma"}
        if unknown:
            raise ValueError(f"unknown kernel fields: {sorted(unknown)}")
        return cls(family=d.get("family", "gaussian"), sigma=float(d.get("sigma", 1.0)))


def as_kernel(k) -> KernelSpec:
    """Accept a KernelSpec, a family name, or a ``{"family", "sigma"}`` dict."""
    if isinstance(k, KernelSpec):
        return k
    if isinstance(k, str):
        return KernelSpec(family=k)
    if isinstance(k, dict):
        return KernelSpec.from_dict(k)
    raise TypeError(f"cannot interpret {k!r} as a kernel")


def check_landmarks(q, k: KernelSpec | None = None, copy=False) -> np.ndarray:
    """Validate a landmark configuration as an ``(N, n)`` float array.

    With a kernel given, also enforce pairwise separation above
    ``MIN_SEPARATION * sigma``.
    """
    q = check_array(q, dtype=np.float64, ensure_2d=True, copy=copy)
    if k is not None and q.shape[0] > 1:
        sep = min_separation(q)
        if sep < MIN_SEPARATION * k.sigma:
            raise DegenerateConfig(
                f"landmarks closer than {MIN_SEPARATION * k.sigma:g}", min_separation=sep
            )
    return q


def min_separation(q: np.ndarray) -> float:
    if q.shape[0] < 2:
        return np.inf
    d = np.linalg.norm(q[:, None, :] - q[None, :, :], axis=-1)
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def _radial(k: KernelSpec, rho):
    """Return ``(k(rho), g(rho), gp_over_rho(rho))``.

    ``g`` is defined by ``grad K(r) = g(|r|) r`` and ``gp_over_rho`` is
    ``g'(rho) / rho``, so that ``Hess K(r) = g I + (g'/rho) r r^T``.
    """
    s = k.sigma
    if k.family == "gaussian":
        val = np.exp(-0.5 * rho**2 / s**2)
        g = -val / s**2
        gp_over = val / s**4
    elif k.family == "matern_3_2":
        a = np.sqrt(3.0) / s
        e = np.exp(-a * rho)
        val = (1.0 + a * rho) * e
        g = -(a**2) * e
        # g'/rho = a^3 e / rho is singular at 0 but multiplies r r^T = O(rho^2)
        with np.errstate(divide="ignore", invalid="ignore"):
            gp_over = np.where(rho > 0, a**3 * e / np.where(rho > 0, rho, 1.0), 0.0)
    else:  # matern_5_2
        a = np.sqrt(5.0) / s
        e = np.exp(-a * rho)
        val = (1.0 + a * rho + (a * rho) ** 2 / 3.0) * e
        g = -(a**2 / 3.0) * (1.0 + a * rho) * e
        gp_over = (a**4 / 3.0) * e
    return val, g, gp_over


def kernel_eval(k, r):
    k = as_kernel(k)
    r = np.asarray(r, dtype=float)
    rho = np.linalg.norm(r, axis=-1)
    return _radial(k, rho)[0]


def kernel_grad(k, r):
    k = as_kernel(k)
    r = np.asarray(r, dtype=float)
    rho = np.linalg.norm(r, axis=-1)
    _, g, _ = _radial(k, rho)
    return g[..., None] * r


def kernel_hess(k, r):
    k = as_kernel(k)
    r = np.asarray(r, dtype=float)
    n = r.shape[-1]
    rho = np.linalg.norm(r, axis=-1)
    _, g, gp_over = _radial(k, rho)
    outer = r[..., :, None] * r[..., None, :]
    return g[..., None, None] * np.eye(n) + gp_over[..., None, None] * outer


def pairwise_differences(q):
    """``D[i, j] = q_i - q_j`` with shape ``(N, N, n)``."""
    return q[:, None, :] - q[None, :, :]


def kernel_matrix(k, q, check=True):
    """Scalar kernel matrix ``K(q)_ij = K(q_i - q_j)``.

    With ``check`` the configuration is validated and the matrix is tested
    for positive definiteness by a Cholesky factorization.
    """
    k = as_kernel(k)
    q = check_landmarks(q, k if check else None)
    Kq = kernel_eval(k, pairwise_differences(q))
    Kq = 0.5 * (Kq + Kq.T)
    if check:
        _cholesky(Kq)
    return Kq


def _cholesky(Kq, ridge=0.0):
    A = Kq + ridge * np.eye(Kq.shape[0]) if ridge else Kq
    try:
        return linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise DegenerateConfig("kernel matrix is not positive definite") from exc


def kernel_solve(k, q, rhs, ridge=0.0):
    """Solve ``K(q) X = rhs`` by Cholesky. ``ridge`` adds ``ridge * I`` (off by default)."""
    Kq = kernel_matrix(k, q)
    rhs = np.asarray(rhs, dtype=float)
    factor = _cholesky(Kq, ridge)
    X = linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(X)):
        raise DegenerateConfig("kernel solve produced non-finite values")
    return X


def condition_number(k, q):
    w = np.linalg.eigvalsh(kernel_matrix(k, q, check=False))
    return float(w[-1] / w[0]) if w[0] > 0 else np.inf
