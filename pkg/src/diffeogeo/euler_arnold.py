"""Right-invariant Sobolev metrics on the diffeomorphism group of the circle.

Fields live on the grid ``x_j = 2 pi j / M``. The inertia operator ``L``
has Fourier multiplier ``(1 + k^2)^s`` and ``K = L^{-1}``. Products are
dealiased with the 3/2 rule.

Bracket convention: the Lie algebra bracket is the negative of the usual
vector-field bracket, ``ad(X)Y = [X, Y] = -(X Y_x - X_x Y)``. Every
function below that takes a bracket uses this sign.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import BlowUp, OrderTooLow

TAIL_BLOWUP = 1e-4
TAIL_RESOLVED = 1e-10


def _is_pow2(M):
    return M >= 2 and (M & (M - 1)) == 0


def _samples(u):
    if isinstance(u, PeriodicField):
        return u.samples
    return np.asarray(u, dtype=float)


def wavenumbers(M):
    return np.fft.fftfreq(M, d=1.0 / M)


@dataclass
class PeriodicField:
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).copy()
        if self.samples.ndim != 1 or not _is_pow2(self.samples.size):
            raise ValueError("samples must be 1-d with a power-of-two length")

    @property
    def M(self):
        return self.samples.size

    @property
    def x(self):
        return grid(self.M)

    def coefficients(self):
        """Fourier coefficients ``u_k`` with ``u(x) = sum_k u_k exp(i k x)``, ordered as ``fftfreq``."""
        return np.fft.fft(self.samples) / self.M

    @classmethod
    def from_coefficients(cls, c):
        c = np.asarray(c)
        return cls(np.real(np.fft.ifft(c * c.size)))

    @classmethod
    def from_function(cls, fn, M):
        return cls(fn(grid(M)))

    def to_dict(self):
        c = self.coefficients()
        return {
            "M": self.M,
            "samples": self.samples.tolist(),
            "coefficients": {"re": c.real.tolist(), "im": c.imag.tolist()},
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def grid(M):
    return 2 * np.pi * np.arange(M) / M


@dataclass(frozen=True)
class InertiaOp:
    s: float = 1.0
    M: int = 256

    def __post_init__(self):
        if not self.s >= 0:
            raise ValueError("s must be nonnegative")
        if not _is_pow2(int(self.M)):
            raise ValueError("M must be a power of two")

    @property
    def multiplier(self):
        k = wavenumbers(self.M)
        return (1.0 + k * k) ** self.s


def _check(op, *fields):
    out = []
    for u in fields:
        u = _samples(u)
        if u.shape != (op.M,):
            raise ValueError(f"field has {u.shape} samples, operator expects ({op.M},)")
        out.append(u)
    return out


def inertia_apply(op, u):
    (u,) = _check(op, u)
    return np.real(np.fft.ifft(op.multiplier * np.fft.fft(u)))


def inertia_invert(op, m):
    (m,) = _check(op, m)
    return np.real(np.fft.ifft(np.fft.fft(m) / op.multiplier))


def derivative(u, order=1):
    """Spectral derivative; the Nyquist mode is dropped for odd orders."""
    u = _samples(u)
    M = u.size
    k = wavenumbers(M)
    ik = (1j * k) ** order
    if order % 2 == 1:
        ik[M // 2] = 0.0
    return np.real(np.fft.ifft(ik * np.fft.fft(u)))


def dealiased_product(a, b):
    """Product of two grid fields with 3/2-rule zero padding."""
    a, b = _samples(a), _samples(b)
    M = a.size
    P = 3 * M // 2

    def pad(v):
        c = np.fft.fft(v)
        c[M // 2] = 0.0
        out = np.zeros(P, dtype=complex)
        out[: M // 2] = c[: M // 2]
        out[-(M // 2) + 1 :] = c[-(M // 2) + 1 :]
        return np.fft.ifft(out) * (P / M)

    w = np.fft.fft(pad(a) * pad(b)) * (M / P)
    c = np.zeros(M, dtype=complex)
    c[: M // 2] = w[: M // 2]
    c[-(M // 2) + 1 :] = w[-(M // 2) + 1 :]
    return np.real(np.fft.ifft(c))


def metric_at_id(op, X, Y):
    """``gamma(X, Y) = (1/2pi) int (L X) Y dx``, evaluated as an exact Fourier sum."""
    X, Y = _check(op, X, Y)
    cx = np.fft.fft(X) / op.M
    cy = np.fft.fft(Y) / op.M
    return float(np.real(np.sum(op.multiplier * cx * np.conj(cy))))


def norm_sq(op, X):
    return metric_at_id(op, X, X)


def ad_star(u, m):
    """``ad*_u m = u m_x + 2 u_x m``, the Lie derivative of the density ``m dx^2``."""
    u, m = _samples(u), _samples(m)
    return dealiased_product(u, derivative(m)) + 2.0 * dealiased_product(derivative(u), m)


def bracket(X, Y):
    """Lie algebra bracket ``ad(X)Y = -(X Y_x - X_x Y)`` (negative of the vector-field bracket)."""
    X, Y = _samples(X), _samples(Y)
    return dealiased_product(derivative(X), Y) - dealiased_product(X, derivative(Y))


def ea_rhs(op, u):
    """Euler-Arnold right-hand side ``u_t = -K ad*_u (L u)``."""
    (u,) = _check(op, u)
    return -inertia_invert(op, ad_star(u, inertia_apply(op, u)))


def tail_fraction(u):
    """Share of ``sum |u_k|^2`` carried by modes with ``|k| > M/3``."""
    u = _samples(u)
    c = np.abs(np.fft.fft(u)) ** 2
    total = c.sum()
    if total == 0:
        return 0.0
    return float(c[np.abs(wavenumbers(u.size)) > u.size / 3].sum() / total)


@dataclass
class EATrajectory:
    times: np.ndarray
    u: np.ndarray
    energy: np.ndarray
    momentum_mean: np.ndarray
    s: float

    def max_energy_drift(self):
        e0 = self.energy[0]
        d = np.max(np.abs(self.energy - e0))
        return float(d / e0) if e0 > 0 else float(d)

    def to_spectral_dict(self):
        c = np.fft.fft(self.u, axis=1) / self.u.shape[1]
        return {
            "s": self.s,
            "times": self.times.tolist(),
            "coefficients": {"re": c.real.tolist(), "im": c.imag.tolist()},
            "energy": self.energy.tolist(),
            "momentum_mean": self.momentum_mean.tolist(),
        }


def ea_evolve(op, u0, T, dt, save_every=1):
    """RK4 in time for ``ea_rhs``; records ``gamma(u, u)`` and the mean of ``m = L u``.

    Raises BlowUp (with the partial trajectory) once the spectral tail
    exceeds ``TAIL_BLOWUP``.
    """
    (u,) = _check(op, u0)
    u = u.copy()
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    if tail_fraction(u) > TAIL_RESOLVED:
        raise ValueError("initial field is not resolved (spectral tail above 1e-10)")
    steps = max(1, int(round(T / dt)))
    h = T / steps

    def f(v):
        return ea_rhs(op, v)

    def record(t, v):
        times.append(t)
        us.append(v.copy())
        energy.append(metric_at_id(op, v, v))
        mmean.append(float(np.mean(inertia_apply(op, v))))

    times, us, energy, mmean = [], [], [], []
    record(0.0, u)
    for n in range(1, steps + 1):
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u = u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        tail = tail_fraction(u)
        if not np.all(np.isfinite(u)) or tail > TAIL_BLOWUP:
            traj = EATrajectory(np.array(times), np.array(us), np.array(energy), np.array(mmean), op.s)
            raise BlowUp("spectral tail exceeded threshold", partial=traj, t=n * h, tail=tail)
        if n % save_every == 0 or n == steps:
            record(n * h, u)
    return EATrajectory(np.array(times), np.array(us), np.array(energy), np.array(mmean), op.s)


def trig_interpolate(u, x):
    """Evaluate the trigonometric interpolant of grid samples ``u`` at points ``x``."""
    u = _samples(u)
    M = u.size
    c = np.fft.fft(u) / M
    k = wavenumbers(M)
    c = c.copy()
    c[M // 2] = 0.0
    return np.real(np.exp(1j * np.outer(np.asarray(x, dtype=float), k)) @ c)


def ea_flow(op, u0, T, dt):
    """Geodesic from the identity together with its flow.

    Integrates ``u_t = ea_rhs(u)`` and ``phi_t = u(t, phi)`` with RK4 and
    returns ``(times, u, phi)``, where ``phi[i]`` samples ``phi(t_i)`` at
    the grid points.
    """
    (u,) = _check(op, u0)
    M = op.M
    steps = max(1, int(round(T / dt)))
    h = T / steps

    def f(state):
        v, p = state[:M], state[M:]
        return np.concatenate([ea_rhs(op, v), trig_interpolate(v, p)])

    y = np.concatenate([u, grid(M)])
    out = [y]
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(y)
    out = np.array(out)
    return np.linspace(0.0, T, steps + 1), out[:, :M], out[:, M:]


def rho(op, xi, eta):
    """``rho(xi) eta = 1/2 K(ad*_xi L eta + ad*_eta L xi)``; symmetric in its arguments."""
    xi, eta = _check(op, xi, eta)
    return 0.5 * inertia_invert(
        op, ad_star(xi, inertia_apply(op, eta)) + ad_star(eta, inertia_apply(op, xi))
    )


def ad_transpose(op, X, Y):
    """``ad(X)^T Y = K ad*_X L Y``, the metric transpose of ``ad(X)``."""
    X, Y = _check(op, X, Y)
    return inertia_invert(op, ad_star(X, inertia_apply(op, Y)))


def _require_order(op):
    if op.s < 1:
        raise OrderTooLow(f"curvature formulas need s >= 1, got s = {op.s}", s=op.s)


def sectional_numerator_id(op, X, Y):
    """Curvature numerator at the identity from the rho operator.

    ``gamma(rho_X X, rho_Y Y) - |rho_X Y|^2 + 3/4 |[X,Y]|^2
      - gamma(rho_X Y, [X,Y]) + gamma(Y, [X,[X,Y]])``

    This is ``g(R(X, Y)X, Y)`` for ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``,
    i.e. minus the sectional curvature times the squared area; see
    ``sectional_curvature_id``.
    """
    _require_order(op)
    X, Y = _check(op, X, Y)
    g = lambda a, b: metric_at_id(op, a, b)  # noqa: E731
    rXX, rYY, rXY = rho(op, X, X), rho(op, Y, Y), rho(op, X, Y)
    b = bracket(X, Y)
    return g(rXX, rYY) - g(rXY, rXY) + 0.75 * g(b, b) - g(rXY, b) + g(Y, bracket(X, b))


def arnold_numerator_id(op, X, Y):
    """The same numerator written with ``ad^T``.

    ``-1/4 |ad(X)^T Y + ad(Y)^T X|^2 + gamma(ad(X)^T X, ad(Y)^T Y)
      + 1/2 gamma(ad(X)^T Y - ad(Y)^T X, ad(X)Y) + 3/4 |[X,Y]|^2``
    """
    _require_order(op)
    X, Y = _check(op, X, Y)
    g = lambda a, b: metric_at_id(op, a, b)  # noqa: E731
    aXY, aYX = ad_transpose(op, X, Y), ad_transpose(op, Y, X)
    aXX, aYY = ad_transpose(op, X, X), ad_transpose(op, Y, Y)
    b = bracket(X, Y)
    sym = aXY + aYX
    return -0.25 * g(sym, sym) + g(aXX, aYY) + 0.5 * g(aXY - aYX, b) + 0.75 * g(b, b)


def sectional_curvature_id(op, X, Y):
    """Sectional curvature of the plane ``span(X, Y)`` at the identity (positive on spheres)."""
    X, Y = _check(op, X, Y)
    area = metric_at_id(op, X, X) * metric_at_id(op, Y, Y) - metric_at_id(op, X, Y) ** 2
    if area <= 1e-14:
        return None
    return -sectional_numerator_id(op, X, Y) / area


def path_energy(op, path, dt):
    """``1/2 sum_i gamma(u_i, u_i) dt`` for a sequence of velocity fields."""
    return 0.5 * dt * sum(metric_at_id(op, u, u) for u in path)


def eulerian_velocities(phis, T=1.0):
    """Eulerian velocities at slice midpoints of a discrete path of circle diffeomorphisms.

    ``phis[i]`` samples the lift ``phi(t_i)`` at the grid points (increasing,
    ``phi(x + 2pi) = phi(x) + 2pi``). On each slice ``u = phi_t o phi^{-1}``
    is interpolated by a periodic cubic spline through
    ``(phi_mid(x_j), (phi_{i+1} - phi_i)(x_j) / dt)`` and sampled on the grid.
    """
    phis = np.asarray(phis, dtype=float)
    n, M = phis.shape[0] - 1, phis.shape[1]
    dt = T / n
    x = grid(M)
    out = []
    for a, b in zip(phis[:-1], phis[1:]):
        pm = 0.5 * (a + b)
        v = (b - a) / dt
        knots = np.append(pm, pm[0] + 2 * np.pi)
        spline = CubicSpline(knots, np.append(v, v[0]), bc_type="periodic")
        xs = pm[0] + np.mod(x - pm[0], 2 * np.pi)
        out.append(spline(xs))
    return np.array(out), dt
