#!/usr/bin/env python3
"""Tiny-scale check of the horizon cost bound and the per-client energy bound.

Runs the online scheduler on a 3-client, 4-round realization, computes the
frame-wise offline optimum on the same realization by exhaustive search, and
reports both inequalities for each penalty weight.
"""

import argparse

from flsched import harness


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--v-grid", default="0.1,1,10")
    parser.add_argument("--grid-step", type=float, default=0.05)
    args = parser.parse_args()

    tiny = harness.TinyCase(seed=args.seed)
    ok = True
    for v in (float(tok) for tok in args.v_grid.split(",")):
        rep = harness.verify_bounds(tiny, v, args.grid_step)
        ok = ok and rep.all_ok
        print(f"V={v:<6g} avg_cost={rep.lhs_cost:.6f} "
              f"lookahead={rep.lookahead_opt:.6f} bound={rep.theorem2_rhs:.6f} "
              f"cost_ok={rep.theorem2_ok} energy_ok={bool(rep.energy_bound_ok.all())}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
