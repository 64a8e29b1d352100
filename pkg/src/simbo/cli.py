"""Command line interface: ``simbo {run,suite,identify,synth}``."""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness, imc
from .problems import true_denominator
from .supervisor import SupervisorConfig, run_identification

EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _print_summary(name: str, summary: dict, out=sys.stdout) -> None:
    cells = "  ".join(f"{a}={v:.3e}" for a, v in summary.items())
    print(f"{name}: {cells}", file=out)


def cmd_run(args) -> int:
    config = harness.ExperimentConfig.from_json(args.config, args.seed)
    out = config.raw["output"]
    fmt = args.format or out["format"]
    path = args.output or out["path"]
    records = harness.run_experiment(config)
    harness.emit(records, fmt, path)
    # keep stdout clean when the trace itself goes there
    summary = harness.summarize(records, config.horizon, harness.switch_step(config))
    _print_summary(config.raw["name"], summary,
                   sys.stderr if path in (None, "-") else sys.stdout)
    return 0


def cmd_suite(args) -> int:
    names = harness.SUITES.get(args.name)
    if names is None:
        names = (args.name,) if args.name in harness.PRESETS else None
    if names is None:
        raise harness.ConfigError(
            f"unknown suite {args.name!r}; choose from {sorted(harness.SUITES) + sorted(harness.PRESETS)}")
    os.makedirs(args.outdir, exist_ok=True)
    for name in names:
        config = harness.preset(name, args.seed)
        records = harness.run_experiment(config)
        path = os.path.join(args.outdir, f"{name}.{args.format}")
        harness.emit(records, args.format, path)
        if args.save_config:
            with open(os.path.join(args.outdir, f"{name}.json"), "w") as fh:
                json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        _print_summary(name, harness.summarize(records, config.horizon,
                                               harness.switch_step(config)))
    return 0


def cmd_identify(args) -> int:
    config = harness.ExperimentConfig.from_dict(
        {"problem": {"n": args.n, "signal": json.loads(args.signal)}}, args.seed)
    problem = harness.build_problem(config)
    m = args.m if args.m is not None else true_denominator(problem.signal, problem.Ts).m
    cfg = SupervisorConfig(m=m, lambda_min=problem.lambda_min, lambda_max=problem.lambda_max,
                           alpha=args.alpha, beta=args.beta, basis=args.basis, Ts=problem.Ts,
                           burn_in=args.burn_in)
    est, res = run_identification(problem, cfg, args.steps)
    print("k,residual," + ",".join(f"d{i}" for i in range(m)))
    for k in range(args.steps):
        cell = "" if np.isnan(res[k]) else "%.6e" % res[k]
        print(f"{k},{cell}," + ",".join("%.12g" % v for v in est[k]))
    return 0


def cmd_synth(args) -> int:
    cfg = imc.SynthesisConfig(grid_points=args.grid_points, stability_margin=args.margin)
    try:
        ctrl = imc.synthesize(np.array(args.d), args.lambda_min, args.lambda_max, cfg)
    except imc.SynthesisInfeasible as exc:
        print(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    check = imc.verify_margin(ctrl.realization, ctrl.K, args.lambda_min, args.lambda_max,
                              args.check_points)
    print("K = [" + ", ".join("%.12g" % v for v in ctrl.K) + "]")
    print(f"grid radius ({args.grid_points} points) = {ctrl.margin:.6f}")
    print(f"check radius ({args.check_points} points) = {check:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simbo", description="Online optimization with an identified internal model.",
        epilog=harness.KEY_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a JSON config",
                       epilog=harness.KEY_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config", help="path to a JSON configuration file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--output", "-o", help="trace file; '-' for stdout (overrides output.path)")
    p.add_argument("--format", choices=("csv", "jsonl"), help="overrides output.format")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run preset experiments by name",
                       description="suites: " + ", ".join(
                           f"{k} ({' '.join(v)})" for k, v in harness.SUITES.items()))
    p.add_argument("name", help="suite or single preset name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--outdir", default="results")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--save-config", action="store_true",
                   help="also write each resolved configuration as JSON")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("identify", help="RLS on OGD decisions; prints the estimate trajectory")
    p.add_argument("--signal", default='{"type": "sine"}', help="signal object as JSON")
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--m", type=int, help="model order (default: exact order)")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1e4)
    p.add_argument("--basis", choices=("delta", "shift"), default="delta")
    p.add_argument("--burn-in", type=int, help="steps before the first update (default 2m+5)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("synth", help="synthesize a gain and report its margin")
    p.add_argument("d", type=_parse_floats, help="model coefficients d_0..d_{m-1}, e.g. '1,-1.99'")
    p.add_argument("--lambda-min", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=5.0)
    p.add_argument("--grid-points", type=int, default=101)
    p.add_argument("--check-points", type=int, default=1001)
    p.add_argument("--margin", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, ValueError, json.JSONDecodeError) as exc:
        print(f"simbo: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"simbo: I/O error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
