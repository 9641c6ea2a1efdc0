"""Command-line entry point: ``diffeogeo <command> [--config PATH] [--out DIR] [--seed N] [--oracle]``.

Exit codes: 0 success, 1 domain error (an ``error.json`` with the error
code is written to the output directory), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from . import curvature as cv
from . import euler_arnold as ea
from . import hunter_saxton as hs
from . import landmarks as lm
from .config import ConfigError, load, schema_help
from .exceptions import GeometryError, NotConverged, SelftestFailed
from .kernels import KernelSpec
from .matching import MatchProblem, endpoint_error, match
from .selftest import run_selftest
from .vanishing import default_target, vanish_distance_experiment


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- output


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv_text(header, rows):
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    buf = io.StringIO()
    buf.write(f"# generated {stamp} by diffeogeo {__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------- builders


def _rng(cfg):
    return np.random.default_rng(cfg["seed"] if cfg["seed"] is not None else 0)


def _kernel(cfg):
    return KernelSpec(**cfg["kernel"])


def _bump_profile(bumps, x):
    f = np.zeros_like(x)
    fp = np.zeros_like(x)
    for b in bumps:
        z = (x - b["center"]) / b["width"]
        e = b["amplitude"] * np.exp(-z * z)
        f += e
        fp += -2.0 * z / b["width"] * e
    return f, fp


def _diffline(grid, bumps):
    f, fp = _bump_profile(bumps, grid.x)
    return hs.DiffLine(grid, f, fp)


def _modes_field(modes, M):
    x = ea.grid(M)
    u = np.zeros(M)
    for m in modes:
        u += m["cos"] * np.cos(m["k"] * x) + m["sin"] * np.sin(m["k"] * x)
    return u


def _random_landmarks(rng, N, n, spread=1.5):
    return rng.normal(size=(N, n)) * spread


# ---------------------------------------------------------------- commands


def cmd_shoot(cfg, out, oracle):
    k = _kernel(cfg)
    rng = _rng(cfg)
    q0 = cfg["q0"] if cfg["q0"] is not None else _random_landmarks(rng, cfg["N"], cfg["n"])
    a0 = cfg["alpha0"] if cfg["alpha0"] is not None else 0.5 * rng.normal(size=q0.shape)
    if a0.shape != q0.shape:
        raise ConfigError(f"alpha0 shape {a0.shape} does not match q0 shape {q0.shape}")
    if oracle:
        path = lm.shoot_adaptive(k, (q0, a0), cfg["T"], cfg["dt"])
    else:
        path = lm.shoot(k, (q0, a0), cfg["T"], cfg["dt"], cfg["integrator"])
    m = len(path.times)
    rows = np.hstack([path.times[:, None], path.q.reshape(m, -1), path.alpha.reshape(m, -1), path.energy_trace[:, None]])
    _atomic_write(os.path.join(out, "shoot.csv"), _csv_text(path.csv_header(), rows))
    _atomic_write(os.path.join(out, "shoot.json"), _json_text(path.to_dict()))
    if path.error is not None:
        raise GeometryError.by_code(path.error, "landmark collision during integration", t=float(path.times[-1]))
    return {"final_q": path.q[-1].tolist(), "max_energy_drift": path.max_energy_drift()}


def cmd_match(cfg, out, oracle):
    prob = MatchProblem(
        cfg["q0"], cfg["q1"], kernel=_kernel(cfg), mode=cfg["mode"], lam=cfg["lam"],
        dt=cfg["dt"], integrator=cfg["integrator"], max_iter=cfg["max_iter"], tol=cfg["tol"],
    )
    try:
        res = match(prob)
    except NotConverged as exc:
        d = exc.result.to_dict()
        _atomic_write(os.path.join(out, "match.json"), _json_text(d))
        raise
    d = res.to_dict()
    if oracle:
        ref = lm.shoot_adaptive(prob.kernel, (prob.q0, res.alpha0), 1.0, prob.dt)
        d["oracle_endpoint_error"] = endpoint_error(ref.q[-1], prob.q1)
    _atomic_write(os.path.join(out, "match.json"), _json_text(d))
    return {"endpoint_error": d["endpoint_error"], "converged": d["converged"]}


def cmd_curvature(cfg, out, oracle):
    k = _kernel(cfg)
    rng = _rng(cfg)
    q = cfg["q"] if cfg["q"] is not None else (
        np.array([[0.0], [1.5]]) if (cfg["N"], cfg["n"]) == (2, 1) else _random_landmarks(rng, cfg["N"], cfg["n"])
    )
    alpha = cfg["alpha"] if cfg["alpha"] is not None else rng.normal(size=q.shape)
    beta = cfg["beta"] if cfg["beta"] is not None else rng.normal(size=q.shape)
    rep = cv.sectional_numerator(k, q, alpha, beta)
    d = rep.to_dict()
    d["method"] = "stress_force"
    if oracle:
        val, err = cv.riemann_fd_oracle(k, q, lm.sharp(k, q, alpha), lm.sharp(k, q, beta), return_error=True)
        d = {
            "numerator": val,
            "denominator": rep.denominator,
            "sectional": val / rep.denominator if rep.denominator > cv.DENOMINATOR_TOL else None,
            "richardson_disagreement": err,
            "method": "fd_oracle",
        }
    d["q"] = np.asarray(q).tolist()
    d["alpha"] = np.asarray(alpha).tolist()
    d["beta"] = np.asarray(beta).tolist()
    _atomic_write(os.path.join(out, "curvature.json"), _json_text(d))
    return {"numerator": d["numerator"], "method": d["method"]}


def _hs_grid(cfg):
    return hs.LineGrid(**cfg["grid"])


def cmd_hs_geodesic(cfg, out, oracle):
    g = _hs_grid(cfg)
    p0, p1 = _diffline(g, cfg["phi0"]), _diffline(g, cfg["phi1"])
    rows = []
    for t in cfg["times"]:
        p = hs.hs_geodesic(p0, p1, t)
        gam = hs.r_map(p).gamma
        rows += [[t, xi, fi, fpi, gi] for xi, fi, fpi, gi in zip(g.x, p.f, p.fp, gam)]
    _atomic_write(os.path.join(out, "hs_geodesic.csv"), _csv_text(["t", "x", "f", "fp", "gamma"], rows))
    return {"distance": hs.hs_distance(p0, p1), "snapshots": len(cfg["times"])}


def cmd_hs_distance(cfg, out, oracle):
    g = _hs_grid(cfg)
    p0, p1 = _diffline(g, cfg["phi0"]), _diffline(g, cfg["phi1"])
    d = {"distance": hs.hs_distance(p0, p1), "grid": g.to_dict()}
    _atomic_write(os.path.join(out, "hs_distance.json"), _json_text(d))
    return d


def cmd_hs_evolve(cfg, out, oracle):
    g = _hs_grid(cfg)
    u0, _ = _bump_profile(cfg["u0"], g.x)
    if oracle:
        steps = max(1, int(round(cfg["T"] / cfg["dt"])))
        idx = sorted(set(list(range(0, steps + 1, cfg["save_every"])) + [steps]))
        times = np.array([i * cfg["T"] / steps for i in idx])
        us = np.array([u0 if t == 0 else hs.hs_exp(u0, t, g)[1] for t in times])
    else:
        traj = hs.hs_evolve(u0, cfg["T"], cfg["dt"], g, ux_cap=cfg["ux_cap"], save_every=cfg["save_every"])
        times, us = traj.times, traj.u
    rows = [[t, xi, ui] for t, u in zip(times, us) for xi, ui in zip(g.x, u)]
    _atomic_write(os.path.join(out, "hs_evolve.csv"), _csv_text(["t", "x", "u"], rows))
    return {"snapshots": len(times), "method": "closed_form" if oracle else "rk4"}


def cmd_ea_evolve(cfg, out, oracle):
    M = cfg["M"]
    u0 = _modes_field(cfg["u0"], M)
    if oracle:
        # doubled resolution, halved step; sampled back on the coarse grid
        ref = ea.ea_evolve(ea.InertiaOp(cfg["s"], 2 * M), _modes_field(cfg["u0"], 2 * M), cfg["T"], cfg["dt"] / 2, save_every=2 * cfg["save_every"])
        traj = ea.EATrajectory(ref.times, ref.u[:, ::2], ref.energy, ref.momentum_mean, ref.s)
    else:
        traj = ea.ea_evolve(ea.InertiaOp(cfg["s"], M), u0, cfg["T"], cfg["dt"], save_every=cfg["save_every"])
    rows = np.hstack([traj.times[:, None], traj.u])
    header = ["t"] + [f"u_{j}" for j in range(M)]
    _atomic_write(os.path.join(out, "ea_evolve.csv"), _csv_text(header, rows))
    _atomic_write(os.path.join(out, "ea_evolve.json"), _json_text(traj.to_spectral_dict()))
    return {"max_energy_drift": traj.max_energy_drift(), "snapshots": len(traj.times)}


def cmd_ea_curvature(cfg, out, oracle):
    op = ea.InertiaOp(cfg["s"], cfg["M"])
    X, Y = _modes_field(cfg["X"], cfg["M"]), _modes_field(cfg["Y"], cfg["M"])
    rho_num = ea.sectional_numerator_id(op, X, Y)
    arnold = ea.arnold_numerator_id(op, X, Y)
    d = {
        "numerator": arnold if oracle else rho_num,
        "method": "arnold" if oracle else "rho",
        "rho_numerator": rho_num,
        "arnold_numerator": arnold,
        "sectional": ea.sectional_curvature_id(op, X, Y),
        "s": cfg["s"],
        "M": cfg["M"],
    }
    _atomic_write(os.path.join(out, "ea_curvature.json"), _json_text(d))
    return {"numerator": d["numerator"], "method": d["method"]}


def cmd_ea_vanish(cfg, out, oracle):
    rows = vanish_distance_experiment(cfg["s"], default_target(cfg["delta"]), cfg["levels"], cfg["iters"])
    d = {"s": cfg["s"], "delta": cfg["delta"], "table": [r.to_dict() for r in rows]}
    _atomic_write(os.path.join(out, "ea_vanish.json"), _json_text(d))
    return {"lengths": [r.length for r in rows]}


def cmd_selftest(cfg, out, oracle):
    results = run_selftest()
    for name, ok in results.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if not all(results.values()):
        raise SelftestFailed("selftest failed", failed=[k for k, v in results.items() if not v])
    return {"passed": len(results)}


COMMANDS = {
    "shoot": cmd_shoot,
    "match": cmd_match,
    "curvature": cmd_curvature,
    "hs geodesic": cmd_hs_geodesic,
    "hs distance": cmd_hs_distance,
    "hs evolve": cmd_hs_evolve,
    "ea evolve": cmd_ea_evolve,
    "ea curvature": cmd_ea_curvature,
    "ea vanish": cmd_ea_vanish,
    "selftest": cmd_selftest,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    common.add_argument("--seed", type=int, metavar="U64", help="random seed (overrides config)")
    common.add_argument("--oracle", action="store_true", help="use the reference implementation")

    p = _Parser(prog="diffeogeo", description="Geodesics and curvature on diffeomorphism groups and landmark spaces.")
    p.add_argument("--version", action="version", version=f"diffeogeo {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("shoot", "match", "curvature", "selftest"):
        sub.add_parser(name, parents=[common])
    for group, actions in (("hs", ("geodesic", "evolve", "distance")), ("ea", ("evolve", "curvature", "vanish"))):
        gp = sub.add_parser(group)
        gsub = gp.add_subparsers(dest="action", required=True, parser_class=_Parser)
        for a in actions:
            gsub.add_parser(a, parents=[common])
    return p


def run(argv=None):
    """Execute one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr)
        print(schema_help(), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    command = args.command if args.command in ("shoot", "match", "curvature", "selftest") else f"{args.command} {args.action}"
    try:
        cfg = load(command, args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        summary = COMMANDS[command](cfg, args.out, args.oracle)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        print(schema_help(command), file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        # inputs that pass the schema but violate a model invariant (e.g. support in the margins)
        print(f"invalid input: {exc}", file=sys.stderr)
        print(schema_help(command), file=sys.stderr)
        return 2
    except GeometryError as exc:
        err = {"command": command, "error": exc.to_dict()}
        _atomic_write(os.path.join(args.out, "error.json"), _json_text(err))
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps({"command": command, "ok": True, **summary}, sort_keys=True, default=float))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
