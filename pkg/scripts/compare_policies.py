#!/usr/bin/env python3
"""Five-policy comparison on one scenario, calibrated to a common selection level.

The scheduler's penalty weight, the random policy's fraction, and the latency
cap are each bisected to the target average number of selected clients; the
budget-greedy and select-all baselines run as-is. Prints the comparison table
and writes compare_<seed>.csv.
"""

import argparse
import json
from pathlib import Path

from flsched import harness

DEFAULT_DOC = {
    "system": {"num_clients": 100, "num_rounds": 300, "frame_len": 30,
               "num_frames": 10, "min_ratio": 0.01},
    "scenario": {"mode": "IID"},
    "policy": {"kind": "PEDPC"},
    "pedpc": {"penalty": 1.0, "iter_rounds": 3},
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="compare_out", help="output directory")
    parser.add_argument("--target-avg", type=float, default=40.0)
    parser.add_argument("--mode", choices=["IID", "NONIID"], default="IID")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.config:
        config_path = Path(args.config)
    else:
        doc = dict(DEFAULT_DOC)
        doc["scenario"] = {"mode": args.mode}
        doc["output"] = {"dir": str(out)}
        config_path = out / "config.json"
        config_path.write_text(json.dumps(doc, indent=2))

    rows = harness.compare_policies(config_path, seed=args.seed,
                                    target_avg=args.target_avg)
    print(f"{'policy':<10} {'knob':>12} {'avg_sel':>8} {'latency_s':>12} "
          f"{'overflow_j':>12} {'total_phi':>10}")
    for r in rows:
        knob = "-" if r.knob is None else f"{r.knob:.5g}"
        print(f"{r.policy:<10} {knob:>12} {r.avg_selected:>8.2f} "
              f"{r.total_latency:>12.2f} {r.energy_overflow:>12.4f} "
              f"{r.total_phi:>10.2f}")
    print(f"\nwrote compare_{args.seed}.csv to {out}/")


if __name__ == "__main__":
    main()
