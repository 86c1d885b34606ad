"""Command-line interface: analysis and simulation with file outputs.

Every sub-command writes a JSON summary embedding the resolved
configuration and the library version; CSV artifacts carry the same
provenance in leading comment lines.  All randomized procedures require
an explicit --seed.  Exit codes: 0 success, 2 invalid parameters
(argparse), 3 infeasible operating point, 1 internal fault.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .debec import bp_threshold_uniform, map_threshold, run_de
from .debms import bicm_threshold, ebn0_db, optimize_bicm_interleaver
from .devo import DevoConfig
from .ensemble import (
    EnsembleParams,
    InterleavingPattern,
    ShorteningPattern,
    design_rate,
    effective_profile_shortening,
    terminated_pattern,
)
from .errors import InfeasibleError
from .finite import ber_sweep, write_ber_csv
from .llr import make_grid
from .parallel import achievable_region
from .queueing import minimize_queue, queue_trace
from .shortening import optimize_devo, optimize_exhaustive, optimize_uniform

EXIT_OK = 0
EXIT_FAULT = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3


def _ensemble_args(p, with_n=False):
    p.add_argument("--dv", type=int, required=True, help="variable node degree")
    p.add_argument("--dc", type=int, required=True, help="check node degree")
    p.add_argument("-L", type=int, required=True, help="replication factor")
    p.add_argument("-w", type=int, required=True, help="smoothing parameter")
    if with_n:
        p.add_argument("-n", type=int, required=True, help="code bits per position")
    else:
        p.add_argument("-n", type=int, default=None, help="code bits per position")


def _params(args) -> EnsembleParams:
    return EnsembleParams(args.dv, args.dc, args.L, args.w, args.n)


def _config_dict(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, payload: dict) -> None:
    summary = {
        "command": args.command,
        "version": __version__,
        "config": _config_dict(args),
    }
    summary.update(payload)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _csv_provenance(args) -> str:
    return f"scldpc {__version__} config={json.dumps(_config_dict(args), sort_keys=True)}"


def _load_pattern(args, params) -> ShorteningPattern:
    if getattr(args, "terminated", False):
        return terminated_pattern(params)
    if getattr(args, "alpha", None):
        return ShorteningPattern.from_json(args.alpha)
    if getattr(args, "pattern_json", None):
        with open(args.pattern_json) as fh:
            return ShorteningPattern.from_json(fh.read())
    return ShorteningPattern(np.zeros(params.L))


def cmd_rate(args) -> int:
    params = _params(args)
    pattern = _load_pattern(args, params)
    rate = design_rate(params, pattern)
    _emit(args, {"rate": rate, "alpha": list(pattern.alpha)})
    return EXIT_OK


def cmd_threshold(args) -> int:
    params = _params(args)
    pattern = _load_pattern(args, params)
    value = bp_threshold_uniform(params, pattern, tol=args.tol)
    payload = {"bp_threshold": value}
    if args.map:
        payload["map_threshold"] = map_threshold(params)
    _emit(args, payload)
    return EXIT_OK


def cmd_optimize_shorten(args) -> int:
    params = _params(args)
    if args.method == "uniform":
        best, rate = optimize_uniform(params, args.eps)
        pattern = best.to_pattern(params.L)
        payload = {"pattern": list(pattern.alpha), "rate": rate, "feasible": True,
                   "iterations": None, "B": best.B, "alpha0": best.alpha}
    elif args.method == "exhaustive":
        pattern = optimize_exhaustive(params, args.eps, grid=args.grid, support=args.support)
        payload = {"pattern": list(pattern.alpha),
                   "rate": design_rate(params, pattern), "feasible": True,
                   "iterations": None}
    else:
        config = DevoConfig(
            population_size=10 * (args.support or (2 * params.w - 1)),
            generations=args.generations,
            seed=args.seed,
        )
        result = optimize_devo(params, args.eps, config=config, support=args.support)
        payload = {"pattern": list(result.pattern.alpha), "rate": result.rate,
                   "feasible": result.feasible, "iterations": result.evaluations}
    if args.sweep_csv:
        _write_rate_sweep(args, params)
    _emit(args, payload)
    return EXIT_OK


def _write_rate_sweep(args, params):
    eps_grid = [float(x) for x in args.sweep_eps.split(",")] if args.sweep_eps else []
    with open(args.sweep_csv, "w", newline="") as fh:
        fh.write(f"# {_csv_provenance(args)}\n")
        fh.write("eps,rate_uniform,rate_terminated\n")
        term_rate = design_rate(params, terminated_pattern(params))
        for eps in eps_grid:
            try:
                _, rate = optimize_uniform(params, eps)
            except InfeasibleError:
                rate = float("nan")
            fh.write(f"{eps!r},{rate!r},{term_rate!r}\n")


def cmd_region(args) -> int:
    params = _params(args)
    frontier = achievable_region(params, grid_step=args.grid_step)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(f"# {_csv_provenance(args)}\n")
            fh.write("eps1,eps2\n")
            for p in frontier:
                fh.write(f"{p.eps1!r},{p.eps2!r}\n")
    _emit(args, {"frontier": [[p.eps1, p.eps2] for p in frontier]})
    return EXIT_OK


def cmd_queue(args) -> int:
    params = _params(args)
    config = DevoConfig(population_size=args.population, generations=args.generations,
                        seed=args.seed if args.seed is not None else 0)
    pattern, trace = minimize_queue(
        params, args.eps1, args.eps2, config=config, mode=args.mode, n=args.n
    )
    _emit(args, {"beta": list(pattern.beta), "Q_trace": list(trace.per_position),
                 "Q_max": trace.max_abs})
    return EXIT_OK


def cmd_bicm_threshold(args) -> int:
    params = _params(args)
    grid = make_grid(args.llr_max, args.bins)
    rate = 1.0 - params.d_v / params.d_c
    if args.mode == "none":
        beta = InterleavingPattern(np.full(params.L, 0.5))
        thr = bicm_threshold(params, beta, tol_db=args.tol_db, grid=grid)
        payload = {"beta": list(beta.beta), "threshold_db": thr,
                   "ebn0_db": ebn0_db(thr, rate)}
    elif args.mode == "terminated":
        beta = InterleavingPattern(np.full(params.L, 0.5))
        shortening = terminated_pattern(params)
        thr = bicm_threshold(params, beta, tol_db=args.tol_db, grid=grid,
                             shortening=shortening)
        term_rate = design_rate(params, shortening)
        payload = {"beta": list(beta.beta), "threshold_db": thr,
                   "ebn0_db": ebn0_db(thr, term_rate)}
    else:
        config = DevoConfig(population_size=args.population, generations=args.generations,
                            seed=args.seed if args.seed is not None else 0)
        result = optimize_bicm_interleaver(
            params, config=config, mode=args.mode, tol_db=args.tol_db, grid=grid
        )
        payload = {"beta": list(result.pattern.beta), "threshold_db": result.threshold_db,
                   "ebn0_db": result.ebn0_db, "evaluations": result.evaluations}
    if args.density_csv:
        from .llr import ask4_bicm_densities

        pair = ask4_bicm_densities(payload["threshold_db"], grid)
        pair.density1.write_csv(args.density_csv + ".c1.csv")
        pair.density2.write_csv(args.density_csv + ".c2.csv")
    _emit(args, payload)
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    grid = [float(x) for x in args.grid.split(",")]
    pattern = None
    if args.scenario == "shortened":
        if args.pattern_json:
            with open(args.pattern_json) as fh:
                pattern = ShorteningPattern.from_json(fh.read())
        else:
            from .shortening import universal_pattern

            pattern = universal_pattern(params)
    elif args.scenario == "bicm" and args.pattern_json:
        with open(args.pattern_json) as fh:
            pattern = InterleavingPattern.from_json(fh.read())
    points = ber_sweep(
        params, args.scenario, grid, args.trials, args.seed,
        channel=args.channel, pattern=pattern, jobs=args.jobs,
    )
    write_ber_csv(args.csv, points, header_comment=_csv_provenance(args))
    _emit(args, {"points": [[p.channel_param, p.ber, p.ci_low, p.ci_high] for p in points],
                 "csv": args.csv})
    return EXIT_OK


def cmd_trace(args) -> int:
    params = _params(args)
    pattern = _load_pattern(args, params)
    profile = effective_profile_shortening(args.eps, pattern)
    result, trace = run_de(params, profile, record_every=args.every)
    trace.write_csv(args.csv)
    _emit(args, {"converged": result.converged, "iterations": result.iterations_used,
                 "final_pe": result.final_pe, "csv": args.csv})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scldpc",
        description="Density-evolution analysis and optimization of tail-biting "
        "spatially coupled LDPC ensembles",
    )
    parser.add_argument("--config", help="JSON file of argument values (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="design rate of a shortened ensemble")
    _ensemble_args(p)
    p.add_argument("--alpha", help="JSON array of per-position alpha")
    p.add_argument("--pattern-json", help="file with a JSON alpha array")
    p.add_argument("--terminated", action="store_true", help="use the termination pattern")
    p.add_argument("--out", help="JSON summary path")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("threshold", help="BP threshold via bisection over uniform eps")
    _ensemble_args(p)
    p.add_argument("--alpha", help="JSON array of per-position alpha")
    p.add_argument("--pattern-json")
    p.add_argument("--terminated", action="store_true")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--map", action="store_true", help="also report the MAP threshold proxy")
    p.add_argument("--out")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("optimize-shorten", help="max-rate decodable shortening pattern")
    _ensemble_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--method", choices=["exhaustive", "uniform", "devo"], required=True)
    p.add_argument("--grid", type=float, default=1e-2, help="quantization of the exhaustive grid")
    p.add_argument("--support", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--sweep-csv", help="CSV of rate vs eps (uniform method)")
    p.add_argument("--sweep-eps", help="comma-separated eps grid for --sweep-csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize_shorten)

    p = sub.add_parser("region", help="two-BEC achievable region frontier")
    _ensemble_args(p)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--csv", help="CSV output path (eps1, eps2)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("queue", help="queue-minimizing interleaver for two BECs")
    _ensemble_args(p)
    p.add_argument("--eps1", type=float, required=True)
    p.add_argument("--eps2", type=float, required=True)
    p.add_argument("--mode", choices=["uniform", "nonuniform"], default="uniform")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--population", type=int, default=40)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_queue)

    p = sub.add_parser("bicm-threshold", help="4-ASK BICM BP threshold / interleaver search")
    _ensemble_args(p)
    p.add_argument("--mode", choices=["none", "terminated", "uniform", "nonuniform"],
                   default="none")
    p.add_argument("--bins", type=int, default=1000)
    p.add_argument("--llr-max", type=float, default=20.0)
    p.add_argument("--tol-db", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--population", type=int, default=16)
    p.add_argument("--generations", type=int, default=6)
    p.add_argument("--density-csv", help="dump the bit-channel densities at the threshold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bicm_threshold)

    p = sub.add_parser("simulate", help="finite-length Monte-Carlo BER sweep")
    _ensemble_args(p, with_n=True)
    p.add_argument("--scenario", choices=["tailbiting", "terminated", "shortened", "bicm"],
                   required=True)
    p.add_argument("--channel", choices=["bec", "bawgn", "ask4"], default="bec")
    p.add_argument("--grid", required=True, help="comma-separated channel parameters")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--pattern-json", help="JSON pattern file (alpha or beta)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--csv", required=True, help="CSV output path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="dump a DE trajectory as CSV (t, z, x)")
    _ensemble_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--alpha")
    p.add_argument("--pattern-json")
    p.add_argument("--terminated", action="store_true")
    p.add_argument("--every", type=int, default=10)
    p.add_argument("--csv", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)

    return parser


def _apply_config_file(argv: list[str], parser: argparse.ArgumentParser) -> list[str]:
    """Prepend flag values from --config FILE; explicit flags override."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    with open(path) as fh:
        values = json.load(fh)
    command = values.pop("command", None)
    extra: list[str] = []
    for key, value in values.items():
        flag = ("-" + key) if len(key) == 1 else ("--" + key.replace("_", "-"))
        if isinstance(value, bool):
            if value:
                extra.append(flag)
        elif value is not None:
            extra.extend([flag, str(value)])
    rest = [a for j, a in enumerate(argv) if j not in (i, i + 1)]
    if command and (not rest or rest[0] != command):
        rest.insert(0, command)
    return [rest[0]] + extra + rest[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if argv and "--config" in argv:
        argv = _apply_config_file(argv, parser)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
