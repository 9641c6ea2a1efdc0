"""Run configurations for the command-line tool.

A config is a JSON object with ``schema_version`` ``"1"`` and the fields
of one command. Unknown fields are rejected; physical parameters are
validated here so numerical code sees clean inputs.
"""
from __future__ import annotations

import json

import numpy as np

SCHEMA_VERSION = "1"
REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration (a usage error, exit code 2)."""


def _pos(name):
    def conv(v):
        v = float(v)
        if not (np.isfinite(v) and v > 0):
            raise ConfigError(f"{name} must be positive, got {v}")
        return v

    return conv


def _nonneg(name):
    def conv(v):
        v = float(v)
        if not (np.isfinite(v) and v >= 0):
            raise ConfigError(f"{name} must be nonnegative, got {v}")
        return v

    return conv


def _posint(name):
    def conv(v):
        if isinstance(v, bool) or int(v) != v or int(v) < 1:
            raise ConfigError(f"{name} must be a positive integer, got {v}")
        return int(v)

    return conv


def _pow2(name):
    def conv(v):
        v = _posint(name)(v)
        if v < 2 or v & (v - 1):
            raise ConfigError(f"{name} must be a power of two, got {v}")
        return v

    return conv


def _choice(name, options):
    def conv(v):
        if v not in options:
            raise ConfigError(f"{name} must be one of {list(options)}, got {v!r}")
        return v

    return conv


def _matrix(name):
    def conv(v):
        if v is None:
            return None
        a = np.asarray(v, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or not np.all(np.isfinite(a)):
            raise ConfigError(f"{name} must be a list of points")
        return a

    return conv


def _optional(conv):
    return lambda v: None if v is None else conv(v)


def _kernel(v):
    if not isinstance(v, dict):
        raise ConfigError("kernel must be an object {family, sigma}")
    unknown = set(v) - {"family", "sigma"}
    if unknown:
        raise ConfigError(f"unknown kernel fields: {sorted(unknown)}")
    return {
        "family": _choice("kernel.family", ("gaussian", "matern_3_2", "matern_5_2"))(
            v.get("family", "gaussian")
        ),
        "sigma": _pos("kernel.sigma")(v.get("sigma", 1.0)),
    }


def _grid(v):
    if not isinstance(v, dict):
        raise ConfigError("grid must be an object {x_min, x_max, M}")
    unknown = set(v) - {"x_min", "x_max", "M"}
    if unknown:
        raise ConfigError(f"unknown grid fields: {sorted(unknown)}")
    g = {
        "x_min": float(v.get("x_min", -10.0)),
        "x_max": float(v.get("x_max", 10.0)),
        "M": _posint("grid.M")(v.get("M", 2048)),
    }
    if g["x_max"] <= g["x_min"] or g["M"] < 16:
        raise ConfigError("grid needs x_max > x_min and M >= 16")
    return g


def _bumps(name):
    """List of ``{center, amplitude, width}`` Gaussian bumps."""

    def conv(v):
        if not isinstance(v, list):
            raise ConfigError(f"{name} must be a list of bumps")
        out = []
        for b in v:
            unknown = set(b) - {"center", "amplitude", "width"}
            if unknown:
                raise ConfigError(f"unknown {name} fields: {sorted(unknown)}")
            out.append(
                {
                    "center": float(b.get("center", 0.0)),
                    "amplitude": float(b.get("amplitude", 1.0)),
                    "width": _pos(f"{name}.width")(b.get("width", 1.0)),
                }
            )
        return out

    return conv


def _modes(name):
    """List of ``{k, cos, sin}`` Fourier modes."""

    def conv(v):
        if not isinstance(v, list):
            raise ConfigError(f"{name} must be a list of modes")
        out = []
        for m in v:
            unknown = set(m) - {"k", "cos", "sin"}
            if unknown:
                raise ConfigError(f"unknown {name} fields: {sorted(unknown)}")
            k = m.get("k", 0)
            if isinstance(k, bool) or int(k) != k or k < 0:
                raise ConfigError(f"{name}.k must be a nonnegative integer")
            out.append({"k": int(k), "cos": float(m.get("cos", 0.0)), "sin": float(m.get("sin", 0.0))})
        return out

    return conv


def _times(v):
    t = [float(x) for x in v]
    if not t:
        raise ConfigError("times must be nonempty")
    return t


KERNEL_DEFAULT = {"family": "gaussian", "sigma": 1.0}

SCHEMAS = {
    "shoot": {
        "kernel": (_kernel, KERNEL_DEFAULT),
        "q0": (_matrix("q0"), None),
        "alpha0": (_matrix("alpha0"), None),
        "N": (_posint("N"), 3),
        "n": (_posint("n"), 2),
        "T": (_pos("T"), 1.0),
        "dt": (_pos("dt"), 1e-3),
        "integrator": (_choice("integrator", ("rk4", "midpoint")), "rk4"),
    },
    "match": {
        "kernel": (_kernel, KERNEL_DEFAULT),
        "q0": (_matrix("q0"), REQUIRED),
        "q1": (_matrix("q1"), REQUIRED),
        "mode": (_choice("mode", ("exact", "inexact")), "exact"),
        "lam": (_pos("lam"), 1.0),
        "dt": (_pos("dt"), 0.01),
        "integrator": (_choice("integrator", ("rk4", "midpoint")), "rk4"),
        "max_iter": (_posint("max_iter"), 200),
        "tol": (_pos("tol"), 1e-10),
    },
    "curvature": {
        "kernel": (_kernel, KERNEL_DEFAULT),
        "q": (_matrix("q"), None),
        "alpha": (_matrix("alpha"), None),
        "beta": (_matrix("beta"), None),
        "N": (_posint("N"), 2),
        "n": (_posint("n"), 1),
    },
    "hs geodesic": {
        "grid": (_grid, {"x_min": -10.0, "x_max": 10.0, "M": 2048}),
        "phi0": (_bumps("phi0"), []),
        "phi1": (_bumps("phi1"), REQUIRED),
        "times": (_times, [0.0, 0.25, 0.5, 0.75, 1.0]),
    },
    "hs distance": {
        "grid": (_grid, {"x_min": -10.0, "x_max": 10.0, "M": 2048}),
        "phi0": (_bumps("phi0"), []),
        "phi1": (_bumps("phi1"), REQUIRED),
    },
    "hs evolve": {
        "grid": (_grid, {"x_min": -10.0, "x_max": 10.0, "M": 2048}),
        "u0": (_bumps("u0"), REQUIRED),
        "T": (_pos("T"), 0.5),
        "dt": (_pos("dt"), 1e-3),
        "ux_cap": (_pos("ux_cap"), 1e3),
        "save_every": (_posint("save_every"), 100),
    },
    "ea evolve": {
        "s": (_nonneg("s"), 1.0),
        "M": (_pow2("M"), 256),
        "u0": (_modes("u0"), REQUIRED),
        "T": (_pos("T"), 1.0),
        "dt": (_pos("dt"), 1e-3),
        "save_every": (_posint("save_every"), 100),
    },
    "ea curvature": {
        "s": (_nonneg("s"), 1.0),
        "M": (_pow2("M"), 64),
        "X": (_modes("X"), REQUIRED),
        "Y": (_modes("Y"), REQUIRED),
    },
    "ea vanish": {
        "s": (_choice("s", (0, 1)), 0),
        "delta": (_pos("delta"), 1.0),
        "levels": (_posint("levels"), 4),
        "iters": (_posint("iters"), 50),
    },
    "selftest": {},
}

COMMON = {"schema_version", "seed"}


def validate(command, raw):
    """Return a validated copy of ``raw`` with defaults filled in."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if str(version) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION!r}")
    schema = SCHEMAS[command]
    unknown = set(raw) - set(schema) - COMMON
    if unknown:
        raise ConfigError(f"unknown fields for {command!r}: {sorted(unknown)}")
    out = {"schema_version": SCHEMA_VERSION}
    seed = raw.get("seed")
    if seed is not None:
        if isinstance(seed, bool) or int(seed) != seed or not 0 <= int(seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        seed = int(seed)
    out["seed"] = seed
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                out[key] = conv(raw[key])
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for {key!r}: {exc}") from exc
        elif default is REQUIRED:
            raise ConfigError(f"missing required field {key!r} for {command!r}")
        else:
            out[key] = conv(default) if default is not None else None
    return out


def load(command, path=None):
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    return validate(command, raw)


def schema_help(command=None):
    """Plain-text summary of the accepted fields."""
    names = [command] if command in SCHEMAS else sorted(SCHEMAS)
    lines = [f"config schema_version {SCHEMA_VERSION!r}; common fields: schema_version, seed"]
    for name in names:
        fields = SCHEMAS[name]
        parts = []
        for key, (_, default) in fields.items():
            parts.append(f"{key} (required)" if default is REQUIRED else key)
        lines.append(f"  {name}: {', '.join(parts) if parts else '(no fields)'}")
    lines.append("see docs/CONFIG.md for types and defaults")
    return "\n".join(lines)
