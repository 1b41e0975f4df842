"""Command line entry point.

Subcommands: run, sweep-v, compare, calibrate, verify-bounds.
Exit codes: 0 success, 2 config error, 3 infeasible/unreachable,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .errors import (ConfigError, Infeasible, InfeasibleBound, InfeasibleConfig,
                     InfeasibleLink, TooLarge, Unreachable)
from .scheduler import POLICY_KINDS, PolicySpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4

_INFEASIBLE_ERRORS = (Infeasible, InfeasibleBound, InfeasibleConfig,
                      InfeasibleLink, Unreachable, TooLarge)


def _parse_v_grid(text: str) -> list[float]:
    try:
        grid = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --v-grid value: {text!r}") from exc
    if not grid:
        raise ConfigError("--v-grid must list at least one value")
    return grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flsched",
                                     description="Federated scheduling experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one policy, write per-round CSV + summary")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--policy", choices=POLICY_KINDS)
    run.add_argument("--out", help="CSV output path (default: from config)")

    sweep = sub.add_parser("sweep-v", help="one PEDPC run per penalty weight")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--v-grid", required=True,
                       help="comma-separated penalty weights, e.g. 0.001,0.01,0.1,1,10")

    comp = sub.add_parser("compare", help="calibrate and compare all five policies")
    comp.add_argument("--config", required=True)
    comp.add_argument("--seed", type=int, default=0)
    comp.add_argument("--target-avg", type=float, default=40.0)

    cal = sub.add_parser("calibrate", help="bisect a policy knob to a target avg selection")
    cal.add_argument("--config", required=True)
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--policy", required=True, choices=("PEDPC", "Random", "FedCS"))
    cal.add_argument("--target-avg", type=float, required=True)

    ver = sub.add_parser("verify-bounds",
                         help="check the cost and energy bounds at tiny scale")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--v-grid", default="0.1,1,10")
    ver.add_argument("--grid-step", type=float, default=0.05)
    return parser


def _cmd_run(args) -> int:
    policy = None
    if args.policy:
        cfg = harness.load_config(args.config)
        policy = PolicySpec(args.policy, cfg.policy.random_fraction, cfg.policy.latency_cap)
    summary = harness.run_experiment(args.config, policy=policy, seed=args.seed,
                                     output_path=args.out)
    doc = summary.to_dict()
    doc.pop("per_client_totals_j")
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    grid = _parse_v_grid(args.v_grid)
    summaries = harness.sweep_v(args.config, grid, seed=args.seed)
    for v, s in zip(grid, summaries):
        print(f"V={v:g} avg_selected={s.avg_selected:.2f} "
              f"total_latency_s={s.total_latency:.6g} "
              f"energy_overflow_j={s.energy_overflow:.6g}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    rows = harness.compare_policies(args.config, seed=args.seed,
                                    target_avg=args.target_avg)
    for row in rows:
        knob = "-" if row.knob is None else f"{row.knob:.6g}"
        print(f"{row.policy:<10} knob={knob:<12} avg_selected={row.avg_selected:7.2f} "
              f"total_latency_s={row.total_latency:12.6g} "
              f"energy_overflow_j={row.energy_overflow:12.6g} "
              f"total_phi={row.total_phi:10.6g}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    knob = harness.calibrate(args.config, args.policy, args.target_avg, seed=args.seed)
    print(f"{knob:.12g}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    grid = _parse_v_grid(args.v_grid)
    tiny = harness.TinyCase(seed=args.seed)
    ok = True
    for v in grid:
        report = harness.verify_bounds(tiny, v, args.grid_step)
        status = "ok" if report.all_ok else "FAIL"
        print(f"V={v:g} lhs={report.lhs_cost:.6g} lookahead={report.lookahead_opt:.6g} "
              f"rhs={report.theorem2_rhs:.6g} cost_bound={report.theorem2_ok} "
              f"energy_bound={bool(report.energy_bound_ok.all())} [{status}]")
        ok = ok and report.all_ok
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep-v": _cmd_sweep,
        "compare": _cmd_compare,
        "calibrate": _cmd_calibrate,
        "verify-bounds": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INFEASIBLE_ERRORS as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
