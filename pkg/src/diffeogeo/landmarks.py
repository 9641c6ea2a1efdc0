"""Metric, cometric and geodesics on landmark space ``Land^N(R^n)``.

Landmarks ``q`` and covectors ``alpha`` are ``(N, n)`` arrays. The kernel
matrix acts on the landmark index and leaves the ``R^n`` index alone.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import DegenerateConfig
from .kernels import (
    MIN_SEPARATION,
    as_kernel,
    check_landmarks,
    kernel_eval,
    kernel_grad,
    kernel_matrix,
    kernel_solve,
    min_separation,
    pairwise_differences,
)

INTEGRATORS = ("rk4", "midpoint")


@dataclass
class LandmarkState:
    q: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.q = check_landmarks(self.q, copy=True)
        self.alpha = np.array(self.alpha, dtype=float).reshape(self.q.shape)

    @property
    def N(self):
        return self.q.shape[0]

    @property
    def dim(self):
        return self.q.shape[1]


@dataclass
class GeodesicPath:
    """Time-sampled ``(q, alpha)`` trajectory.

    ``q`` and ``alpha`` have shape ``(len(times), N, n)``. If integration
    stopped early, ``error`` holds the error code and the arrays end at the
    last valid state.
    """

    times: np.ndarray
    q: np.ndarray
    alpha: np.ndarray
    energy_trace: np.ndarray
    integrator: str = "rk4"
    dt: float = 0.0
    error: str | None = None
    kernel: dict = field(default_factory=dict)

    @property
    def states(self):
        return [LandmarkState(q, a) for q, a in zip(self.q, self.alpha)]

    @property
    def final(self):
        return LandmarkState(self.q[-1], self.alpha[-1])

    def max_energy_drift(self):
        e0 = self.energy_trace[0]
        drift = np.abs(self.energy_trace - e0)
        return float(drift.max() / e0) if e0 > 0 else float(drift.max())

    def csv_header(self):
        N, n = self.q.shape[1:]
        cols = ["t"]
        cols += [f"q_{i + 1}_{c + 1}" for i in range(N) for c in range(n)]
        cols += [f"alpha_{i + 1}_{c + 1}" for i in range(N) for c in range(n)]
        cols.append("energy")
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        m = len(self.times)
        rows = np.hstack(
            [
                self.times[:, None],
                self.q.reshape(m, -1),
                self.alpha.reshape(m, -1),
                self.energy_trace[:, None],
            ]
        )
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self):
        return {
            "times": self.times.tolist(),
            "q": self.q.tolist(),
            "alpha": self.alpha.tolist(),
            "energy": self.energy_trace.tolist(),
            "integrator": self.integrator,
            "dt": self.dt,
            "error": self.error,
            "kernel": self.kernel,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(
            times=np.asarray(d["times"], dtype=float),
            q=np.asarray(d["q"], dtype=float),
            alpha=np.asarray(d["alpha"], dtype=float),
            energy_trace=np.asarray(d["energy"], dtype=float),
            integrator=d.get("integrator", "rk4"),
            dt=float(d.get("dt", 0.0)),
            error=d.get("error"),
            kernel=d.get("kernel", {}),
        )


def _check_pair(q, v):
    v = np.asarray(v, dtype=float)
    if v.shape != q.shape:
        raise ValueError(f"shape mismatch: landmarks {q.shape}, vector {v.shape}")
    return v


def metric(k, q, P, Q):
    """``g_q(P, Q) = sum_kl K^{-1}(q)_kl <P_k, Q_l>``."""
    q = check_landmarks(q)
    P, Q = _check_pair(q, P), _check_pair(q, Q)
    return float(np.sum(P * kernel_solve(k, q, Q)))


def cometric(k, q, alpha, beta):
    """``g^{-1}_q(alpha, beta) = sum_ij K(q)_ij <alpha_i, beta_j>``."""
    q = check_landmarks(q)
    alpha, beta = _check_pair(q, alpha), _check_pair(q, beta)
    return float(np.sum(alpha * (kernel_matrix(k, q) @ beta)))


def sharp(k, q, alpha):
    """Raise an index: ``P_k = sum_i K(q_k - q_i) alpha_i``."""
    q = check_landmarks(q)
    return kernel_matrix(k, q, check=False) @ _check_pair(q, alpha)


def flat(k, q, P):
    """Lower an index by solving ``K(q) alpha = P``."""
    q = check_landmarks(q)
    return kernel_solve(k, q, _check_pair(q, P))


def horizontal_lift(k, q, P, x):
    """Minimal-norm vector field through the landmark velocity ``P``, evaluated at ``x``.

    ``x`` is a point ``(n,)`` or a batch ``(m, n)``; the result has the same shape.
    """
    q = check_landmarks(q)
    c = flat(k, q, P)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    Kx = kernel_eval(k, xs[:, None, :] - q[None, :, :])
    out = Kx @ c
    return out[0] if single else out


def energy(k, q, alpha):
    """``E(q, alpha) = 1/2 g^{-1}_q(alpha, alpha)``."""
    return 0.5 * cometric(k, q, alpha, alpha)


def hamiltonian_rhs(k, q, alpha):
    """Hamilton's equations for ``E``: ``(dq, dalpha) = (alpha^sharp, -F(alpha, alpha))``.

    ``dalpha_k = -sum_i grad K(q_k - q_i) <alpha_k, alpha_i>``, i.e. minus
    ``dE/dq_k``.
    """
    k = as_kernel(k)
    q = np.asarray(q, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    diff = pairwise_differences(q)
    Kq = kernel_eval(k, diff)
    G = kernel_grad(k, diff)
    dq = Kq @ alpha
    dalpha = -np.einsum("ikc,ik->ic", G, alpha @ alpha.T)
    return dq, dalpha


def geodesic_accel(k, q, qdot):
    """Second-order (vector-form) geodesic equation, written as the double sums.

    ``qdd_n = -1/2 sum_{k,i,j,l} Kinv_ki gradK(q_i - q_j) (K_in - K_jn) Kinv_jl <qd_k, qd_l>
             + sum_{k,i} Kinv_ki <gradK(q_i - q_n), qd_i - qd_n> qd_k``
    """
    k = as_kernel(k)
    q = check_landmarks(q)
    qdot = _check_pair(q, qdot)
    Kq = kernel_matrix(k, q)
    Kinv = np.linalg.inv(Kq)
    G = kernel_grad(k, pairwise_differences(q))  # G[i, j] = grad K(q_i - q_j)
    V = qdot @ qdot.T  # <qd_k, qd_l>
    dK = Kq[:, None, :] - Kq[None, :, :]  # dK[i, j, n] = K_in - K_jn
    first = -0.5 * np.einsum("ki,ijc,ijn,jl,kl->nc", Kinv, G, dK, Kinv, V)
    rel = qdot[:, None, :] - qdot[None, :, :]  # rel[i, n] = qd_i - qd_n
    second = np.einsum("ki,inc,inc,kd->nd", Kinv, G, rel, qdot)
    return first + second


def _rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _midpoint_step(f, y, dt, tol=1e-14, max_iter=100):
    # implicit midpoint by fixed-point iteration; symmetric and symplectic
    z = y + dt * f(y)
    for _ in range(max_iter):
        z_new = y + dt * f(0.5 * (y + z))
        if np.max(np.abs(z_new - z)) <= tol * max(1.0, np.max(np.abs(z_new))):
            return z_new
        z = z_new
    return z


def _time_grid(T, dt):
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    steps = max(1, int(round(T / dt)))
    return np.linspace(0.0, T, steps + 1)


def shoot(k, state0, T=1.0, dt=1e-3, integrator="rk4"):
    """Integrate the Hamiltonian geodesic flow from ``state0`` up to time ``T``.

    ``state0`` is a LandmarkState or a ``(q0, alpha0)`` pair. A landmark
    collision stops the integration; the path is truncated and its
    ``error`` set to ``"DegenerateConfig"``.
    """
    k = as_kernel(k)
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown integrator {integrator!r}")
    if not isinstance(state0, LandmarkState):
        state0 = LandmarkState(*state0)
    q0 = check_landmarks(state0.q, k)
    shape = q0.shape
    times = _time_grid(T, dt)
    h = times[1] - times[0]

    def f(y):
        q, a = y[0], y[1]
        dq, da = hamiltonian_rhs(k, q, a)
        return np.stack([dq, da])

    step = _rk4_step if integrator == "rk4" else _midpoint_step
    y = np.stack([q0, state0.alpha])
    qs, alphas, energies = [y[0]], [y[1]], [energy(k, y[0], y[1])]
    error = None
    for _ in times[1:]:
        y = step(f, y, h)
        if not np.all(np.isfinite(y)) or min_separation(y[0]) < MIN_SEPARATION * k.sigma:
            error = DegenerateConfig.code
            break
        qs.append(y[0])
        alphas.append(y[1])
        energies.append(0.5 * np.sum(y[1] * (kernel_matrix(k, y[0], check=False) @ y[1])))
    m = len(qs)
    return GeodesicPath(
        times=times[:m],
        q=np.array(qs).reshape(m, *shape),
        alpha=np.array(alphas).reshape(m, *shape),
        energy_trace=np.array(energies),
        integrator=integrator,
        dt=float(h),
        error=error,
        kernel=k.to_dict(),
    )


def shoot_vector_form(k, q0, qdot0, T=1.0, dt=1e-3):
    """RK4 on the second-order system ``qdd = geodesic_accel(q, qd)``.

    Returns ``(times, q, qdot)`` arrays.
    """
    k = as_kernel(k)
    q0 = check_landmarks(q0, k)
    times = _time_grid(T, dt)
    h = times[1] - times[0]

    def f(y):
        return np.stack([y[1], geodesic_accel(k, y[0], y[1])])

    y = np.stack([q0, _check_pair(q0, qdot0)])
    out = [y]
    for _ in times[1:]:
        y = _rk4_step(f, y, h)
        out.append(y)
    out = np.array(out)
    return times, out[:, 0], out[:, 1]


def flow_points(path: GeodesicPath, x):
    """Carry arbitrary points ``x`` ``(m, n)`` along the flow of a shot geodesic.

    Points follow ``dx/dt = sum_i K(x - q_i(t)) alpha_i(t)``, integrated by
    RK4 jointly with the landmark system.
    """
    k = as_kernel(path.kernel)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    N = path.q.shape[1]

    def f(y):
        q, a, pts = y[:N], y[N : 2 * N], y[2 * N :]
        dq, da = hamiltonian_rhs(k, q, a)
        v = kernel_eval(k, pts[:, None, :] - q[None, :, :]) @ a
        return np.concatenate([dq, da, v])

    y = np.concatenate([path.q[0], path.alpha[0], x])
    for t0, t1 in zip(path.times[:-1], path.times[1:]):
        y = _rk4_step(f, y, t1 - t0)
    return y[2 * N :]


def shoot_adaptive(k, state0, T=1.0, dt=1e-3, rtol=1e-12, atol=1e-12):
    """Reference solution of the Hamiltonian flow by adaptive DOP853, sampled like ``shoot``."""
    k = as_kernel(k)
    if not isinstance(state0, LandmarkState):
        state0 = LandmarkState(*state0)
    q0 = check_landmarks(state0.q, k)
    shape = q0.shape
    size = q0.size
    times = _time_grid(T, dt)

    def f(_, y):
        dq, da = hamiltonian_rhs(k, y[:size].reshape(shape), y[size:].reshape(shape))
        return np.concatenate([dq.ravel(), da.ravel()])

    sol = solve_ivp(
        f,
        (0.0, times[-1]),
        np.concatenate([q0.ravel(), state0.alpha.ravel()]),
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    m = sol.y.shape[1]
    qs = sol.y[:size].T.reshape(m, *shape)
    alphas = sol.y[size:].T.reshape(m, *shape)
    energies = np.array([0.5 * np.sum(a * (kernel_matrix(k, q, check=False) @ a)) for q, a in zip(qs, alphas)])
    error = None if sol.success and m == len(times) else DegenerateConfig.code
    return GeodesicPath(
        times=sol.t,
        q=qs,
        alpha=alphas,
        energy_trace=energies,
        integrator="dop853",
        dt=float(times[1] - times[0]),
        error=error,
        kernel=k.to_dict(),
    )
