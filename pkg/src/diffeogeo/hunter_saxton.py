"""Hunter-Saxton geometry of diffeomorphisms of the line.

A diffeomorphism ``phi = Id + f`` with ``f(-inf) = 0`` and ``f'`` decaying
is sampled on a uniform grid. The R-map ``gamma = 2 (sqrt(phi') - 1)``
is an isometry onto an open convex subset of a flat L^2 space, so
geodesics and distances are explicit there. ``hs_evolve`` integrates the
Hunter-Saxton equation directly and is checked against those formulas.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline

from .exceptions import BlowUp, NotDiffeo, OutOfChart

MARGIN_FRACTION = 0.1
# f' within this distance of -1 triggers a warning
BOUNDARY_WARN = 1e-6


class BoundaryWarning(UserWarning):
    """A diffeomorphism is close to the boundary ``phi' = 0`` of its chart."""


@dataclass(frozen=True)
class LineGrid:
    x_min: float = -10.0
    x_max: float = 10.0
    M: int = 2048

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if int(self.M) < 16:
            raise ValueError("M must be at least 16")

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.M)

    @property
    def h(self):
        return (self.x_max - self.x_min) / (self.M - 1)

    def margin_mask(self):
        """Nodes within the zero margin at either end of the window."""
        w = MARGIN_FRACTION * (self.x_max - self.x_min)
        x = self.x
        return (x < self.x_min + w) | (x > self.x_max - w)

    def to_dict(self):
        return {"x_min": self.x_min, "x_max": self.x_max, "M": self.M}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"x_min", "x_max", "M"}
        if unknown:
            raise ValueError(f"unknown grid fields: {sorted(unknown)}")
        return cls(float(d["x_min"]), float(d["x_max"]), int(d["M"]))


def _support_tol(v):
    return 1e-8 * max(1.0, float(np.max(np.abs(v))))


def _check_margins(grid, v, name, exc=ValueError):
    m = grid.margin_mask()
    worst = float(np.max(np.abs(v[m])))
    if worst > _support_tol(v):
        msg = f"{name} does not vanish in the grid margins (max {worst:.3g})"
        raise exc(msg) if exc is ValueError else exc(msg, max_margin=worst)


@dataclass
class DiffLine:
    """``phi = Id + f`` sampled on ``grid``, with ``fp = f'`` stored separately.

    ``f(x_min) = 0`` and ``f'`` vanishes in both margins, so ``f`` is
    constant (not necessarily zero) on the right margin.
    """

    grid: LineGrid
    f: np.ndarray
    fp: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).copy()
        self.fp = np.asarray(self.fp, dtype=float).copy()
        if self.f.shape != (self.grid.M,) or self.fp.shape != (self.grid.M,):
            raise ValueError("f and fp must have one sample per grid node")
        if np.min(1.0 + self.fp) <= 0:
            raise NotDiffeo("1 + f' is not positive", min_derivative=float(np.min(1.0 + self.fp)))
        if np.min(1.0 + self.fp) < BOUNDARY_WARN:
            warnings.warn("phi' is within 1e-6 of zero", BoundaryWarning, stacklevel=2)
        if abs(self.f[0]) > _support_tol(self.f):
            raise ValueError("f must vanish at x_min")
        _check_margins(self.grid, self.fp, "f'")

    @classmethod
    def identity(cls, grid):
        z = np.zeros(grid.M)
        return cls(grid, z, z)

    @classmethod
    def from_derivative(cls, grid, fp):
        """Build ``f`` from ``f'`` by cumulative trapezoid from ``x_min``."""
        fp = np.asarray(fp, dtype=float)
        return cls(grid, cumulative_trapezoid(fp, grid.x, initial=0.0), fp)

    @property
    def phi(self):
        return self.grid.x + self.f

    def consistency_error(self):
        """Max deviation between ``f`` and the trapezoid integral of ``fp``."""
        return float(np.max(np.abs(cumulative_trapezoid(self.fp, self.grid.x, initial=0.0) - self.f)))

    def to_dict(self):
        return {"grid": self.grid.to_dict(), "samples": {"f": self.f.tolist(), "fp": self.fp.tolist()}}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        s = d["samples"]
        return cls(LineGrid.from_dict(d["grid"]), s["f"], s["fp"])


@dataclass
class FlatPoint:
    """Samples of ``gamma = R(phi)``; ``gamma > -2`` and vanishes in the margins."""

    grid: LineGrid
    gamma: np.ndarray

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).copy()
        if self.gamma.shape != (self.grid.M,):
            raise ValueError("gamma must have one sample per grid node")
        if np.min(self.gamma) <= -2.0:
            raise OutOfChart("gamma <= -2", min_gamma=float(np.min(self.gamma)))
        _check_margins(self.grid, self.gamma, "gamma")

    def to_dict(self):
        return {"grid": self.grid.to_dict(), "samples": {"gamma": self.gamma.tolist()}}

    @classmethod
    def from_dict(cls, d):
        return cls(LineGrid.from_dict(d["grid"]), d["samples"]["gamma"])


def r_map(phi: DiffLine) -> FlatPoint:
    """``gamma = 2 (sqrt(1 + f') - 1)``."""
    if np.min(1.0 + phi.fp) <= 0:
        raise NotDiffeo("1 + f' is not positive")
    # 2 f' / (sqrt(1 + f') + 1) avoids cancellation near f' = 0
    gamma = 2.0 * phi.fp / (np.sqrt(1.0 + phi.fp) + 1.0)
    return FlatPoint(phi.grid, gamma)


def _fp_from_gamma(gamma):
    return 0.25 * gamma * gamma + gamma


def r_inverse(g: FlatPoint) -> DiffLine:
    """``phi(x) = x + 1/4 int_{x_min}^x (gamma^2 + 4 gamma)``; ``f'`` is stored exactly."""
    if np.min(g.gamma) <= -2.0:
        raise OutOfChart("gamma <= -2")
    return DiffLine.from_derivative(g.grid, _fp_from_gamma(g.gamma))


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("grids differ")


def hs_geodesic(phi0: DiffLine, phi1: DiffLine, t: float) -> DiffLine:
    """Point at time ``t`` on the geodesic from ``phi0`` to ``phi1`` (straight line in ``gamma``)."""
    _same_grid(phi0, phi1)
    g0, g1 = r_map(phi0).gamma, r_map(phi1).gamma
    return r_inverse(FlatPoint(phi0.grid, (1.0 - t) * g0 + t * g1))


def l2_norm(grid, v):
    return float(np.sqrt(trapezoid(np.asarray(v) ** 2, grid.x)))


def hs_distance(phi0: DiffLine, phi1: DiffLine) -> float:
    """``|| R(phi1) - R(phi0) ||_{L^2(dx)}`` with trapezoid weights."""
    _same_grid(phi0, phi1)
    return l2_norm(phi0.grid, r_map(phi1).gamma - r_map(phi0).gamma)


def hs_velocity(phi: DiffLine, ft, nu=0):
    """Eulerian velocity ``u = f_t o phi^{-1}`` (or its ``nu``-th x-derivative) on the grid.

    ``ft`` are the Lagrangian velocities at the grid nodes. Outside
    ``phi([x_min, x_max])`` the velocity is constant, so evaluation points
    are clipped to that interval and derivatives vanish there.
    """
    y = phi.phi
    spline = CubicSpline(y, np.asarray(ft, dtype=float))
    x = phi.grid.x
    out = spline(np.clip(x, y[0], y[-1]), nu)
    if nu > 0:
        out = np.where((x < y[0]) | (x > y[-1]), 0.0, out)
    return out


def hs_exp(u0, t, grid: LineGrid):
    """Geodesic from the identity with initial velocity ``u0`` (samples on ``grid``).

    Returns ``(phi_t, u_t)``: the diffeomorphism at time ``t`` and its
    Eulerian velocity. In flat coordinates ``gamma(t) = t u0'``.
    """
    u0 = np.asarray(u0, dtype=float)
    du0 = np.gradient(u0, grid.h, edge_order=2)
    gamma = t * du0
    if np.min(gamma) <= -2.0:
        raise OutOfChart("geodesic left the chart", t=t)
    phi = r_inverse(FlatPoint(grid, gamma))
    # d/dt f' = (gamma / 2 + 1) gamma_t, integrated from x_min
    ft = u0 + 0.5 * t * cumulative_trapezoid(du0 * du0, grid.x, initial=0.0)
    return phi, hs_velocity(phi, ft)


def hs_pde_rhs(u, grid: LineGrid):
    """``u_t = -u u_x + 1/2 int_{x_min}^x u_x^2``."""
    u = np.asarray(u, dtype=float)
    ux = np.gradient(u, grid.h, edge_order=2)
    return -u * ux + 0.5 * cumulative_trapezoid(ux * ux, grid.x, initial=0.0)


@dataclass
class HSTrajectory:
    times: np.ndarray
    u: np.ndarray
    grid: LineGrid

    def to_csv_rows(self):
        header = ["t"] + [f"u_{i}" for i in range(self.grid.M)]
        rows = [[float(t)] + list(map(float, ui)) for t, ui in zip(self.times, self.u)]
        return header, rows


def hs_evolve(u0, T, dt, grid: LineGrid, ux_cap=1e3, save_every=1):
    """RK4 integration of the Hunter-Saxton equation from ``u0``.

    Raises BlowUp (with the partial trajectory) when ``max |u_x|`` exceeds
    ``ux_cap``.
    """
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    u = np.asarray(u0, dtype=float).copy()
    _check_margins(grid, np.gradient(u, grid.h, edge_order=2), "u0'")
    steps = max(1, int(round(T / dt)))
    h = T / steps
    times, us = [0.0], [u.copy()]

    def rhs(v):
        return hs_pde_rhs(v, grid)

    for n in range(1, steps + 1):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * h * k1)
        k3 = rhs(u + 0.5 * h * k2)
        k4 = rhs(u + h * k3)
        u = u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ux_max = float(np.max(np.abs(np.gradient(u, grid.h, edge_order=2))))
        if not np.isfinite(ux_max) or ux_max > ux_cap:
            traj = HSTrajectory(np.array(times), np.array(us), grid)
            raise BlowUp("|u_x| exceeded cap", partial=traj, t=n * h, ux_max=ux_max)
        if n % save_every == 0 or n == steps:
            times.append(n * h)
            us.append(u.copy())
    return HSTrajectory(np.array(times), np.array(us), grid)


def flat_path_energy(path, times):
    """``sum_i int ((gamma_{i+1} - gamma_i) / dt_i)^2 dx dt_i`` for a list of DiffLines."""
    times = np.asarray(times, dtype=float)
    gammas = [r_map(p).gamma for p in path]
    grid = path[0].grid
    E = 0.0
    for i in range(len(path) - 1):
        dt = times[i + 1] - times[i]
        E += l2_norm(grid, (gammas[i + 1] - gammas[i]) / dt) ** 2 * dt
    return E


def h1_path_energy(path, times):
    """``sum_i int (u_x)^2 dx dt_i`` with ``u`` the Eulerian velocity at each slice midpoint.

    Velocities are formed in Lagrangian form from differences of ``f``,
    pushed to the Eulerian grid by spline interpolation and differentiated
    in ``x`` through the spline.
    """
    times = np.asarray(times, dtype=float)
    grid = path[0].grid
    E = 0.0
    for a, b, t0, t1 in zip(path[:-1], path[1:], times[:-1], times[1:]):
        dt = t1 - t0
        mid = DiffLine(grid, 0.5 * (a.f + b.f), 0.5 * (a.fp + b.fp))
        ux = hs_velocity(mid, (b.f - a.f) / dt, nu=1)
        E += trapezoid(ux * ux, grid.x) * dt
    return E


def blowup_time(u0, grid: LineGrid):
    """First time the geodesic from the identity with velocity ``u0`` reaches ``phi' = 0``."""
    m = float(np.min(np.gradient(np.asarray(u0, dtype=float), grid.h, edge_order=2)))
    return np.inf if m >= 0 else -2.0 / m
