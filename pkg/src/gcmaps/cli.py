"""Command-line interface.

Subcommands: ``rate``, ``graph``, ``map``, ``stability``, ``oracle-check``.
Variable indices on the command line are 1-based. Data goes to stdout;
the run manifest and error messages go to stderr.

Exit codes: 0 ok, 2 parse error, 3 validation error, 4 solver failure,
5 numerical degeneracy, 6 trajectory divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__, maps, oracle
from .errors import GcError, ValidationError
from .langevin import builtin_lorenz, parse_system
from .modelio import format_model, parse_model
from .vougc import Partition, conditional_rate, finite_horizon_gc, pairwise_graph, unconditional_graph

THREADS_ENV = "GCMAPS_THREADS"

log = logging.getLogger("gcmaps")


def _indices(values):
    out = []
    for v in values or []:
        for part in str(v).split(","):
            if part.strip():
                out.append(int(part) - 1)
    return tuple(sorted(out))


def _partition(args, n):
    target = _indices(args.target)
    source = _indices(args.source)
    if args.cond is None:
        cond = tuple(i for i in range(n) if i not in target and i not in source)
    else:
        cond = _indices(args.cond)
    for i in target + source + cond:
        if not 0 <= i < n:
            raise ValidationError(f"index {i + 1} out of range 1..{n}")
    part = Partition(target, source, cond)
    part.validate(n)
    return part


def _read(path, digests):
    with open(path, "rb") as fh:
        data = fh.read()
    digests[path] = hashlib.sha256(data).hexdigest()
    return data.decode("utf-8")


def _g(x):
    return format(float(x), ".17g")


def _matrix_str(M):
    return "[" + "; ".join(" ".join(_g(v) for v in row) for row in np.atleast_2d(M)) + "]"


def cmd_rate(args, manifest):
    model = parse_model(_read(args.model, manifest["inputs"]))
    if args.scale != 1.0:
        model = model.scaled(args.scale)
    if args.dump_model:
        with open(args.dump_model, "w", encoding="utf-8") as fh:
            fh.write(format_model(model))
    part = _partition(args, model.n)
    res = conditional_rate(model, part, method=args.method)
    out = sys.stdout
    print(f"rate = {res.rate:.6f}", file=out)
    print(f"te_rate = {res.te_rate:.6f}", file=out)
    print(f"rate_exact = {_g(res.rate)}", file=out)
    print(f"P33 = {_matrix_str(res.P33)}", file=out)
    print(f"kalman_gain = {_matrix_str(res.kalman_gain)}", file=out)
    print(f"closed_loop_max_re = {_g(res.closed_loop_max_re)}", file=out)
    print(f"detectable = {str(res.detectable).lower()}", file=out)
    print(f"source_decoupled = {str(res.source_decoupled).lower()}", file=out)
    print(f"marginal = {str(res.marginal).lower()}", file=out)
    print(f"residual = {res.residual:.3e}", file=out)
    if args.horizon is not None:
        f = finite_horizon_gc(model, part, args.horizon)
        print(f"horizon = {_g(args.horizon)}", file=out)
        print(f"horizon_rate = {_g(f / args.horizon)}", file=out)
    if args.check_oracle is not None:
        est = oracle.rate_via_subsampling(model, part, args.check_oracle)
        gap = abs(est - res.rate) / res.rate if res.rate else abs(est)
        print(f"oracle_dt = {_g(args.check_oracle)}", file=out)
        print(f"oracle_rate = {_g(est)}", file=out)
        print(f"oracle_rel_gap = {gap:.6e}", file=out)
    return 0


def cmd_graph(args, manifest):
    model = parse_model(_read(args.model, manifest["inputs"]))
    g = unconditional_graph(model) if args.unconditional else pairwise_graph(model)
    n = g.n
    if args.format == "csv":
        print("target," + ",".join(f"y{j + 1}" for j in range(n)))
        for i in range(n):
            cells = ["" if i == j or not g.ok(i, j) else _g(g.rates[i, j]) for j in range(n)]
            print(f"y{i + 1}," + ",".join(cells))
    else:
        width = 12
        print(" " * 6 + "".join(f"{'y' + str(j + 1):>{width}}" for j in range(n)))
        for i in range(n):
            cells = []
            for j in range(n):
                if i == j:
                    cells.append(f"{'—':>{width}}")
                elif not g.ok(i, j):
                    cells.append(f"{'error':>{width}}")
                else:
                    cells.append(f"{g.rates[i, j]:>{width}.6f}")
            print(f"{'y' + str(i + 1):<6}" + "".join(cells))
    for (i, j), msg in sorted(g.errors.items()):
        print(f"cell ({i + 1},{j + 1}): {msg}", file=sys.stderr)
    return 0


def _load_system(args, manifest):
    if args.builtin:
        if args.builtin != "lorenz":
            raise ValidationError(f"unknown builtin system {args.builtin!r}")
        return builtin_lorenz(args.sigma, args.rho, args.beta, args.nu)
    if not args.system:
        raise ValidationError("give a system file or --builtin")
    return parse_system(_read(args.system, manifest["inputs"]))


def _trajectory(system, args, manifest):
    if args.y0:
        y0 = [float(v) for v in args.y0.split(",")]
    else:
        y0 = [1.0] * system.n
    if len(y0) != system.n:
        raise ValidationError(f"--y0 needs {system.n} values")
    if args.sde:
        traj = maps.integrate_sde(system, y0, args.duration, args.dt, args.transient,
                                  seed=args.seed, substeps=args.substeps)
    else:
        traj = maps.integrate_ode(system, y0, args.duration, args.dt, args.transient,
                                  substeps=args.substeps)
    manifest["integrator"] = {
        "method": traj.integrator,
        "dt": args.dt,
        "substeps": traj.substeps,
        "duration": args.duration,
        "transient": args.transient,
        "y0": y0,
        "rng": traj.rng,
        "seed": traj.seed,
    }
    return traj


def _threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def cmd_map(args, manifest):
    if args.analysis == "stability":
        return cmd_stability(args, manifest)
    system = _load_system(args, manifest)
    traj = _trajectory(system, args, manifest)
    n = system.n
    if args.analysis == "graph":
        analysis = "graph"
    else:
        if not args.target or not args.source:
            raise ValidationError("rate analysis needs --target and --source")
        analysis = _partition(args, n)
    samples = maps.gc_map(system, traj.states, analysis, workers=_threads())
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    head = ["t"] + [f"y{k + 1}" for k in range(n)] + ["lambda", "detJ", "singular"]
    head += [f"G_{i + 1}_{j + 1}" for i, j in pairs] if analysis == "graph" else ["rate"]
    head.append("status")
    out = sys.stdout
    print(",".join(head), file=out)
    for t, s in zip(traj.times, samples):
        row = [_g(t)] + [_g(v) for v in s.point] + [_g(s.lam), _g(s.det_j), str(int(s.singular))]
        if analysis == "graph":
            row += [_g(s.values.rates[i, j]) if s.status == "ok" and s.values.ok(i, j) else ""
                    for i, j in pairs]
        else:
            row.append(_g(s.values) if s.status == "ok" else "")
        row.append("ok" if s.status == "ok" else "error")
        print(",".join(row), file=out)
    glob = maps.global_rate(samples, analysis)
    if analysis == "graph":
        for i, j in pairs:
            print(f"# global G_{i + 1}_{j + 1} = {_g(glob.values[i, j])}", file=out)
    else:
        print(f"# global rate = {_g(glob.values)}", file=out)
    print(f"# excluded_fraction = {_g(glob.excluded)}", file=out)
    return 0


def cmd_stability(args, manifest):
    system = _load_system(args, manifest)
    traj = _trajectory(system, args, manifest)
    pts = maps.stability_map(system, traj.states)
    out = sys.stdout
    print(",".join(["t"] + [f"y{k + 1}" for k in range(system.n)] + ["lambda", "detJ", "unstable"]), file=out)
    for t, p in zip(traj.times, pts):
        print(",".join([_g(t)] + [_g(v) for v in p.point] + [_g(p.lam), _g(p.det_j), str(int(p.unstable))]),
              file=out)
    valid = [p for p in pts if not math.isnan(p.lam)]
    frac = sum(p.unstable for p in valid) / len(valid) if valid else math.nan
    print(f"# unstable_fraction = {_g(frac)}", file=out)
    return 0


def cmd_oracle_check(args, manifest):
    model = parse_model(_read(args.model, manifest["inputs"]))
    part = _partition(args, model.n)
    rate = conditional_rate(model, part).rate
    amax = float(np.max(np.abs(model.A)))
    dts = args.dt if args.dt else [1e-2 / amax, 1e-3 / amax, 1e-4 / amax]
    print("dt,F_over_dt,rate,rel_error")
    errs = []
    for dt in dts:
        est = oracle.rate_via_subsampling(model, part, dt)
        err = est - rate
        rel = abs(err) / rate if rate else abs(err)
        errs.append(err)
        print(f"{_g(dt)},{_g(est)},{_g(rate)},{_g(rel)}")
    if len(dts) >= 2 and all(e != 0 for e in errs):
        slope = oracle.convergence_slope(dts, errs)
    else:
        slope = math.nan
    print(f"# slope = {_g(slope)}")
    return 0


def _add_partition(p):
    p.add_argument("--target", nargs="+", required=True, help="target indices (1-based)")
    p.add_argument("--source", nargs="+", required=True, help="source indices (1-based)")
    p.add_argument("--cond", nargs="*", default=None,
                   help="conditioning indices; default: all remaining variables")


def _add_system(p):
    p.add_argument("system", nargs="?", help="system-definition file")
    p.add_argument("--builtin", choices=["lorenz"])
    p.add_argument("--sigma", type=float, default=10.0, help="Lorenz sigma")
    p.add_argument("--rho", type=float, default=28.0, help="Lorenz rho")
    p.add_argument("--beta", type=float, default=8.0 / 3.0, help="Lorenz beta")
    p.add_argument("--nu", type=float, default=1.0, help="Lorenz noise intensity")
    p.add_argument("--duration", type=float, default=200.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--transient", type=float, default=100.0)
    p.add_argument("--substeps", type=int, default=maps.DEFAULT_SUBSTEPS)
    p.add_argument("--y0", help="initial state, comma-separated (default all ones)")
    p.add_argument("--sde", action="store_true", help="Euler-Maruyama instead of RK4")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="gcmaps", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--manifest", help="also write the run manifest (JSON) to this file")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="conditional GC rate of a VOU model")
    p.add_argument("model")
    _add_partition(p)
    p.add_argument("--scale", type=float, default=1.0, help="multiply Sigma by this factor")
    p.add_argument("--method", choices=["auto", "quadratic", "schur"], default="auto")
    p.add_argument("--horizon", type=float, help="also print F(h)/h at this horizon")
    p.add_argument("--check-oracle", type=float, metavar="DT",
                   help="also estimate the rate by subsampling at interval DT")
    p.add_argument("--dump-model", metavar="PATH", help="write the model as parsed")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("graph", help="pairwise GC graph of a VOU model")
    p.add_argument("model")
    p.add_argument("--unconditional", action="store_true")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("map", help="GC map along a trajectory (CSV)")
    _add_system(p)
    p.add_argument("--analysis", choices=["graph", "rate", "stability"], default="graph")
    p.add_argument("--target", nargs="+")
    p.add_argument("--source", nargs="+")
    p.add_argument("--cond", nargs="*", default=None)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("stability", help="local stability map along a trajectory (CSV)")
    _add_system(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("oracle-check", help="compare with the subsampled discrete-time estimate")
    p.add_argument("model")
    _add_partition(p)
    p.add_argument("--dt", type=float, nargs="+", help="sampling intervals (default 1e-2,1e-3,1e-4 / max|A|)")
    p.set_defaults(func=cmd_oracle_check)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    manifest = {
        "command": ["gcmaps"] + argv,
        "version": __version__,
        "started": datetime.now(timezone.utc).isoformat(),
        "inputs": {},
        "threads": _threads(),
    }
    t0 = time.perf_counter()
    try:
        code = args.func(args, manifest)
    except GcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 3
    manifest["elapsed_s"] = round(time.perf_counter() - t0, 6)
    manifest["exit_code"] = code
    text = json.dumps(manifest, sort_keys=True)
    print(f"manifest: {text}", file=sys.stderr)
    if args.manifest:
        with open(args.manifest, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
