"""Path-length experiment for low-order Sobolev metrics on circle diffeomorphisms.

Paths from the identity to a target ``phi_1 = Id + d`` are discretized
in Lagrangian form: ``n`` time slices of ``M`` particle positions
``phi_i(y_j)``, ``y_j = 2 pi j / M``. On each slice the velocity is the
piecewise-linear interpolant of the particle velocities over the
Eulerian cells at the slice midpoint, whose ``H^s`` norm (``s`` in
``{0, 1}``) is exact:

    G = 1/2pi sum_j [ (h_j^2 + h_j h_{j+1} + h_{j+1}^2)/3 b_j + s (h_{j+1} - h_j)^2 / b_j ]

with ``h`` the particle velocities and ``b`` the cell widths. Energy is
``1/2 sum G dt`` and length is ``sum sqrt(G) dt``. Each refinement level
quadruples ``M`` and doubles ``n``; paths are seeded with the straight
path and with compression waves (particles piling into a thin layer
that sweeps around the circle), and the best seed is refined by
preconditioned gradient descent on the energy.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .euler_arnold import InertiaOp, PeriodicField, grid, trig_interpolate

TWOPI = 2.0 * np.pi
BASE_M = 64
BASE_N = 64
WAVE_RATIOS = (10.0, 100.0, 1000.0)


def path_energy_lagrangian(P, dt, s):
    """Energy, length, energy gradient and smallest cell width of a Lagrangian path.

    ``P`` has shape ``(n + 1, M)``; the gradient vanishes on the fixed
    end slices.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        return _path_energy(P, dt, s)


def _path_energy(P, dt, s):
    pm = 0.5 * (P[1:] + P[:-1])
    h = (P[1:] - P[:-1]) / dt
    b = np.diff(np.concatenate([pm, pm[:, :1] + TWOPI], axis=1), axis=1)
    hn = np.roll(h, -1, axis=1)
    a = (h * h + h * hn + hn * hn) / 3.0
    c = hn - h
    G = (a * b + s * c * c / b).sum(axis=1) / TWOPI
    E = 0.5 * G.sum() * dt
    L = np.sqrt(np.maximum(G, 0.0)).sum() * dt

    dG_db = (a - s * c * c / b**2) / TWOPI
    dG_dh = (
        b * (2 * h + hn) / 3.0
        + np.roll(b * (2 * hn + h) / 3.0, 1, axis=1)
        + s * (2 * np.roll(c / b, 1, axis=1) - 2 * c / b)
    ) / TWOPI
    dG_dpm = np.roll(dG_db, 1, axis=1) - dG_db
    g = np.zeros_like(P)
    g[:-1] += 0.5 * dt * (-dG_dh / dt + 0.5 * dG_dpm)
    g[1:] += 0.5 * dt * (dG_dh / dt + 0.5 * dG_dpm)
    g[0] = 0.0
    g[-1] = 0.0
    return E, L, g, float(b.min())


def _diag_preconditioner(P, dt, s):
    # diagonal of the energy Hessian in h, moved to the slice endpoints
    pm = 0.5 * (P[1:] + P[:-1])
    b = np.diff(np.concatenate([pm, pm[:, :1] + TWOPI], axis=1), axis=1)
    bl = np.roll(b, 1, axis=1)
    Dk = ((2.0 / 3.0) * (b + bl) + 2.0 * s * (1.0 / b + 1.0 / bl)) / TWOPI / dt * 0.5
    D = np.zeros_like(P)
    D[:-1] += Dk
    D[1:] += Dk
    return D


def straight_path(y, d, n):
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return y[None, :] + t * d[None, :]


def wave_path(y, d, n, R):
    """Compression-wave path to ``Id + d`` for a nonnegative displacement ``d``.

    At time ``t`` a front at ``y_b = 2 pi t`` separates particles already
    moved to ``y + d(y)`` (behind) from unmoved ones (ahead); in between a
    layer of width ``d(y_b) / (1 - 1/R)`` is compressed by the factor ``R``.
    """
    P = []
    ye = np.append(y, TWOPI)
    de = np.append(d, d[0])
    for t in np.linspace(0.0, 1.0, n + 1):
        yb = TWOPI * t
        db = np.interp(yb, ye, de)
        J = db / (1.0 - 1.0 / R)
        ramp = db * (1.0 - (y - yb) / max(J, 1e-300))
        f = np.where(y <= yb, d, np.where(y <= yb + J, ramp, 0.0))
        P.append(y + f)
    return np.array(P)


def minimize_path(P, dt, s, iters, tol=1e-3):
    """Diagonally preconditioned gradient descent with backtracking on the path energy.

    Returns ``(P, energy, length, iterations, converged)``. Convergence
    means the preconditioned gradient norm fell below ``tol`` times the
    energy; a stalled line search ends the run unconverged.
    """
    E, L, g, _ = path_energy_lagrangian(P, dt, s)
    step = 1.0
    for k in range(iters):
        pg = g / _diag_preconditioner(P, dt, s)
        gg = float((g * pg).sum())
        if np.sqrt(gg) <= tol * max(E, 1e-300) or gg == 0.0:
            return P, E, L, k, True
        while True:
            trial = P - step * pg
            Et, Lt, gt, bmin = path_energy_lagrangian(trial, dt, s)
            if bmin > 0 and Et <= E - 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-16:
                return P, E, L, k, False
        P, E, L, g = trial, Et, Lt, gt
        step = min(2.0 * step, 1.0)
    pg = g / _diag_preconditioner(P, dt, s)
    gg = float((g * pg).sum())
    return P, E, L, iters, bool(np.sqrt(gg) <= tol * max(E, 1e-300))


@dataclass
class LevelResult:
    level: int
    M: int
    n: int
    length: float
    energy: float
    start: str
    start_length: float
    iterations: int
    converged: bool

    def to_dict(self):
        return asdict(self)


def level_sizes(level):
    """Grid points and time slices at a refinement level (``M`` x4, ``n`` x2 per level)."""
    return BASE_M * 4 ** (level - 1), BASE_N * 2 ** (level - 1)


def run_level(s, target, level, iters=50):
    """Minimize path length from Id to ``Id + target`` at one refinement level."""
    M, n = level_sizes(level)
    y = grid(M)
    d = trig_interpolate(target, y) if np.any(target.samples) else np.zeros(M)
    dt = 1.0 / n
    starts = {"straight": straight_path(y, d, n)}
    if np.min(d) >= 0:
        for R in WAVE_RATIOS:
            starts[f"wave_R{int(R)}"] = wave_path(y, d, n, R)
    lengths = {name: path_energy_lagrangian(P, dt, s)[1] for name, P in starts.items()}
    best = min(lengths, key=lengths.get)
    P, E, L, it, conv = minimize_path(starts[best], dt, s, iters)
    return LevelResult(level, M, n, float(L), float(E), best, float(lengths[best]), it, conv)


def default_target(delta=1.0, M=BASE_M):
    """Bump displacement ``delta (1 - cos y) / 2``; ``Id + d`` is a diffeomorphism for ``delta < 2``."""
    return PeriodicField(delta * (1.0 - np.cos(grid(M))) / 2.0)


def vanish_distance_experiment(s, target=None, levels=4, iters=50, n_threads=None):
    """Minimized path lengths from Id to ``Id + target`` across refinement levels.

    ``s`` (an order or an InertiaOp) must be 0 or 1. ``target`` is a PeriodicField displacement (any
    power-of-two size; it is trigonometrically interpolated to each level).
    Returns a list of LevelResult. Levels are independent and may run in
    parallel threads (``DIFFEOGEO_THREADS``).
    """
    if isinstance(s, InertiaOp):
        s = s.s
    if s not in (0, 1):
        raise ValueError("the exact slice metric is implemented for s in {0, 1}")
    if target is None:
        target = default_target()
    d = target.samples
    if np.min(1.0 + np.gradient(d, TWOPI / d.size)) <= 0:
        raise ValueError("target does not define a diffeomorphism")
    if n_threads is None:
        n_threads = max(1, int(os.environ.get("DIFFEOGEO_THREADS", "1") or 1))
    lv = range(1, levels + 1)
    if n_threads == 1:
        return [run_level(s, target, ell, iters) for ell in lv]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(lambda ell: run_level(s, target, ell, iters), lv))
