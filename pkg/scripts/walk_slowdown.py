#!/usr/bin/env python3
"""Measure how a biased revisiting walk slows the restart pipeline.

For each down-step probability p we simulate the walk over a fixed task
window, estimate efficiency directly and via regeneration blocks, and
compare both against the drift prediction (1 - 2p) * e0, where e0 is the
plain-restart efficiency of the same size/mark pair.

Usage: python scripts/walk_slowdown.py [--levels N] [--seed S]
"""

import argparse
import sys

from failsim.dist import Exponential
from failsim.procgen import generate_renewal
from failsim.restart import efficiency, run_restart
from failsim.rwalk import find_regenerations, simulate_walk_restart, walk_efficiency


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=40_000)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args(argv)

    w = generate_renewal(Exponential(2.0), args.levels, seed=args.seed,
                         mark_law=Exponential(1.0))
    e0 = efficiency(run_restart(w, args.levels)).ratio
    print(f"plain restart efficiency e0 = {e0:.4f}")
    print(f"{'p':>6} {'direct':>8} {'blocks':>8} {'n_blocks':>8} {'(1-2p)e0':>9}")
    for p in (0.0, 0.1, 0.2, 0.3, 0.4):
        run = simulate_walk_restart(w, p, args.levels)
        epochs, _ = find_regenerations(run.trace)
        if len(epochs) >= 10:
            rep = walk_efficiency(run, epochs, min_blocks=10)
            direct, blocks, nb = rep.direct.ratio, rep.formula_ratio, rep.n_blocks
        else:
            direct = efficiency(run.records).ratio
            blocks, nb = float("nan"), len(epochs)
        print(f"{p:6.2f} {direct:8.4f} {blocks:8.4f} {nb:8d} {(1 - 2 * p) * e0:9.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
