#!/usr/bin/env python3
"""Penalty-weight sweep at full scale: selection count, latency, energy overflow.

Writes per-run CSVs plus a combined sweep table under the output directory and
prints the trend. With no --config a default full-scale configuration is
generated next to the outputs.
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
    parser.add_argument("--out", default="sweep_out", help="output directory")
    parser.add_argument("--v-grid", default="1e-3,1e-2,1e-1,1,10")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.config:
        config_path = Path(args.config)
    else:
        doc = dict(DEFAULT_DOC)
        doc["output"] = {"dir": str(out)}
        config_path = out / "config.json"
        config_path.write_text(json.dumps(doc, indent=2))

    grid = [float(tok) for tok in args.v_grid.split(",")]
    summaries = harness.sweep_v(config_path, grid, seed=args.seed)
    print(f"{'V':>10} {'avg_selected':>12} {'latency_s':>12} {'overflow_j':>12}")
    for v, s in zip(grid, summaries):
        print(f"{v:>10g} {s.avg_selected:>12.2f} {s.total_latency:>12.2f} "
              f"{s.energy_overflow:>12.4f}")
    print(f"\nwrote per-run CSVs and sweep_{args.seed}.csv to {out}/")


if __name__ == "__main__":
    main()
