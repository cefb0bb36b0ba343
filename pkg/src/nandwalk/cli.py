"""Command-line front end: ``nandwalk <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 refusal (cap, budget or contract),
3 failed verification.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys

import numpy as np

from . import nand
from .exceptions import CapExceededError, ContractError
from .gadget import verify_gadget
from .graph import build_walk_system, system_to_json
from .nand import NandInstance
from .product_formula import build_schedule, calibrate_constants, measure_error, write_constants
from .records import ExperimentRecord, fit_loglog, read_columns
from .runner import (
    CalibrationError,
    RunConfig,
    calibrate,
    load_calibration,
    sample_instances,
    simulate_batch,
    sweep_scaling,
    write_calibration,
)
from .statevector import state_to_json

EXIT_OK, EXIT_USAGE, EXIT_REFUSED, EXIT_FAILED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _instance_from_args(args) -> NandInstance:
    if args.bits is None:
        raise UsageError("--bits is required (a 0/1 string or @instance.json)")
    if args.bits.startswith("@"):
        inst = nand.load_instance(args.bits[1:])
        if args.depth is not None and args.depth != inst.depth:
            raise UsageError(f"--depth {args.depth} disagrees with instance file depth {inst.depth}")
        return inst
    try:
        return NandInstance.from_string(args.bits, depth=args.depth)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_config(args) -> RunConfig:
    config = load_calibration(args.config) if args.config else load_calibration()
    overrides = {
        "order_index": args.order[0] if args.order else None,
        "time_const": args.time_const,
        "runway_const": args.runway_const,
        "width_const": args.sigma,
        "eps_sim": args.eps_sim,
    }
    return dataclasses.replace(config, **{k: v for k, v in overrides.items() if v is not None})


def cmd_eval(args):
    inst = _instance_from_args(args)
    if args.randomized:
        value, queries = nand.eval_randomized_pruning(inst, seed=args.seed)
        print(f"{value} {queries}")
    else:
        print(nand.eval_exact(inst))
    return EXIT_OK


def cmd_classical_sweep(args):
    depths = list(range(args.min_depth, args.max_depth + 1))
    rows = []
    for d, w0, w1 in nand.worst_case_table(depths + [args.max_depth + 1]):
        rows.append({"n": d, "N": 2**d, "W0": float(w0), "W1": float(w1), "W": float(max(w0, w1))})
    for a, b in zip(rows, rows[1:]):
        a["ratio_exponent"] = math.log2(b["W"] / a["W"])
    rows = rows[:-1]
    fits = {}
    if len(rows) >= 3:
        slope, intercept, r2 = fit_loglog([r["N"] for r in rows], [r["W"] for r in rows])
        fits["W_vs_N"] = {"slope": slope, "intercept": intercept, "r2": r2}
    record = ExperimentRecord("classical-sweep", {"depths": depths}, rows, fits, seed=args.seed)
    _emit(record.dump(args.format), args.out)
    return EXIT_OK


def cmd_gadget_verify(args):
    report = verify_gadget(args.depth if args.depth is not None else 3, args.trials, seed=args.seed)
    print(json.dumps(report))
    ok = report["max_deviation"] <= 1e-12 and report["max_ancilla_amplitude"] <= 1e-12
    ok &= report["two_queries_each"]
    return EXIT_OK if ok else EXIT_FAILED


def cmd_dump_system(args):
    inst = _instance_from_args(args)
    system = build_walk_system(inst, args.runway_len, args.attach)
    _emit(json.dumps(system_to_json(system)) + "\n", args.out)
    return EXIT_OK


def cmd_trotter_error(args):
    inst = _instance_from_args(args)
    system = build_walk_system(inst, args.runway_len, args.attach)
    rng = np.random.default_rng(args.seed)
    probe = rng.standard_normal(system.dim) + 1j * rng.standard_normal(system.dim)
    probe /= np.linalg.norm(probe)
    rows = []
    for k in args.order or [1, 2]:
        for r in args.segments:
            err = measure_error(system, args.time, k, r, probe)
            rows.append({
                "n": inst.depth,
                "M": system.runway_len,
                "k": k,
                "t": args.time,
                "r": r,
                "lambda": args.time / r,
                "error": err,
                "queries": build_schedule(k, args.time, r).queries,
            })
    fits = {}
    for k in args.order or [1, 2]:
        pts = [(row["lambda"], row["error"]) for row in rows if row["k"] == k and row["error"] > 0]
        if len(pts) >= 3:
            slope, intercept, r2 = fit_loglog(*zip(*pts))
            fits[f"k={k}"] = {"slope": slope, "intercept": intercept, "r2": r2}
    config = {"bits": inst.bit_string(), "runway_len": system.runway_len, "attach": system.attach}
    _emit(ExperimentRecord("trotter-error", config, rows, fits, seed=args.seed).dump(args.format), args.out)
    return EXIT_OK


def cmd_run(args):
    if args.order and len(args.order) > 1:
        raise UsageError("run takes a single --order")
    config = _run_config(args)
    if args.bits is not None:
        instances = [_instance_from_args(args)]
    elif args.random is not None and args.depth is not None:
        instances = sample_instances(args.depth, args.random, seed=args.seed)
    else:
        raise UsageError("run needs --bits, or --depth with --random COUNT")
    results = simulate_batch(instances, config, method=args.method)
    if args.snapshot:
        geo = config.geometry(instances[0].depth)
        system = build_walk_system(instances[0], geo["runway_len"], geo["attach"])
        from .statevector import prepare_wave_packet

        psi0 = prepare_wave_packet(system, width=geo["width"], momentum=config.momentum)
        with open(args.snapshot, "w") as fh:
            json.dump({"initial_state": state_to_json(psi0)}, fh)
    rows = [r.to_json() for r in results]
    if args.format == "jsonl":
        _emit("".join(json.dumps(row) + "\n" for row in rows), args.out)
    else:
        # wall times live in the header so bodies are reproducible
        flat = [{k: v for k, v in row.items() if k not in ("config", "ledger", "wall_time")} for row in rows]
        meta = {**config.to_json(), "wall_times": [row["wall_time"] for row in rows]}
        record = ExperimentRecord("run", meta, flat, seed=args.seed)
        _emit(record.to_csv(), args.out)
    return EXIT_OK


def cmd_sweep(args):
    config = _run_config(args)
    depths = list(range(args.min_depth, args.max_depth + 1))
    orders = args.order or [1, 2, 3]
    rows = sweep_scaling(depths, config, orders, execute_max_depth=args.execute_max_depth, seed=args.seed)
    fits = {}
    for k in orders:
        sub = [r for r in rows if r["k"] == k]
        if len(sub) >= 3:
            slope, intercept, r2 = fit_loglog([r["N"] for r in sub], [r["queries"] for r in sub])
            fits[f"k={k}"] = {"slope": slope, "intercept": intercept, "r2": r2,
                              "expected": (1 + 1 / (2 * k)) / 2}
    record = ExperimentRecord("sweep", config.to_json(), rows, fits, seed=args.seed)
    _emit(record.dump(args.format), args.out)
    return EXIT_OK


def cmd_calibrate(args):
    command = "nandwalk " + " ".join(args.argv)
    if args.target == "trotter":
        result = calibrate_constants(seed=args.seed)
        if args.out:
            write_constants(result["constants"], args.out, command)
        print(json.dumps({str(k): v for k, v in result["constants"].items()}))
        return EXIT_OK
    try:
        config, report = calibrate(args.depths, args.trials, seed=args.seed)
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    if args.out:
        write_calibration(config, report, args.out, command)
    print(json.dumps({"config": config.to_json(), "report": report}))
    return EXIT_OK


def cmd_fit(args):
    where = dict(item.split("=", 1) for item in args.where or [])
    xs, ys = read_columns(args.file, args.x, args.y, where)
    slope, intercept, r2 = fit_loglog(xs, ys)
    print(json.dumps({"slope": slope, "intercept": intercept, "r2": r2, "points": len(xs)}))
    return EXIT_OK


def _shared(p, *names):
    opts = {
        "depth": dict(type=int, help="tree depth n"),
        "bits": dict(help="leaf bits as a 0/1 string, or @file for instance JSON"),
        "order": dict(type=int, nargs="+", help="order index k (formula order 2k)"),
        "time-const": dict(type=float, help="evolution time constant c_t"),
        "runway-const": dict(type=int, help="runway length constant"),
        "sigma": dict(type=float, help="packet width constant"),
        "eps-sim": dict(type=float, help="target simulation error"),
        "seed": dict(type=int, default=0),
        "out": dict(help="output file (default stdout)"),
        "format": dict(choices=["csv", "jsonl"], default="csv"),
    }
    for name in names:
        p.add_argument(f"--{name}", **opts[name])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nandwalk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("eval", help="classical exact (or randomized) evaluation")
    _shared(p, "depth", "bits", "seed")
    p.add_argument("--randomized", action="store_true", help="randomized pruning; prints value and queries")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classical-sweep", help="worst-case expected queries of randomized pruning")
    _shared(p, "seed", "out", "format")
    p.add_argument("--min-depth", type=int, default=0)
    p.add_argument("--max-depth", type=int, default=24)
    p.set_defaults(func=cmd_classical_sweep)

    p = sub.add_parser("gadget-verify", help="two-query gadget against dense exponentials")
    _shared(p, "depth", "seed")
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_gadget_verify)

    p = sub.add_parser("dump-system", help="edge lists of H_D and H_O as JSON")
    _shared(p, "depth", "bits", "out")
    p.add_argument("--runway-len", type=int)
    p.add_argument("--attach", type=int)
    p.set_defaults(func=cmd_dump_system)

    p = sub.add_parser("trotter-error", help="product-formula error ladder")
    _shared(p, "depth", "bits", "order", "seed", "out", "format")
    p.add_argument("--runway-len", type=int, default=16)
    p.add_argument("--attach", type=int)
    p.add_argument("--time", type=float, default=2.0)
    p.add_argument("--segments", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    p.set_defaults(func=cmd_trotter_error)

    p = sub.add_parser("run", help="end-to-end walk evaluation")
    _shared(p, "depth", "bits", "order", "time-const", "runway-const", "sigma", "eps-sim", "seed", "out", "format")
    p.add_argument("--random", type=int, metavar="COUNT", help="evaluate COUNT random inputs of --depth")
    p.add_argument("--config", help="calibration fixture (default: shipped)")
    p.add_argument("--method", choices=["formula", "exact"], default="formula")
    p.add_argument("--snapshot", help="write the initial packet as [re, im] pairs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="query-count scaling table")
    _shared(p, "order", "time-const", "runway-const", "sigma", "eps-sim", "seed", "out", "format")
    p.add_argument("--min-depth", type=int, default=4)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--execute-max-depth", type=int, default=-1,
                   help="also run the evolution for depths up to this value")
    p.add_argument("--config", help="calibration fixture (default: shipped)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit walk decision parameters or product-formula constants")
    _shared(p, "seed", "out")
    p.add_argument("--target", choices=["walk", "trotter"], default="walk")
    p.add_argument("--depths", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--trials", type=int, default=40)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="log-log regression over two CSV columns")
    p.add_argument("file")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--where", nargs="*", metavar="COL=VALUE", help="row filters")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.argv = argv
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapExceededError, ContractError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
