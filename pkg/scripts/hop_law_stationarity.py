#!/usr/bin/env python3
"""Check how fast the checkpoint hop law settles: compare the landed
inter-arrival distribution after 1 hop and after many hops against the
analytic limit moments, and report chain efficiency with a burn-in.

Usage: python scripts/hop_law_stationarity.py [--reps R] [--hops H] [--seed S]
"""

import argparse
import sys

import numpy as np

from failsim.checkpoint import (
    checkpoint_efficiency,
    estimate_limit_moments,
    run_checkpointing,
    simulate_hops,
)
from failsim.dist import Exponential, Weibull
from failsim.procgen import generate_renewal
from failsim.rng import CounterStream


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--hops", type=int, default=8)
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args(argv)

    cases = [
        ("exp(2)/exp(1)", Exponential(2.0), Exponential(1.0)),
        ("weibull(1,2)/exp(1)", Weibull(1.0, 2.0), Exponential(1.0)),
    ]
    qs = (0.1, 0.25, 0.5, 0.75, 0.9)

    for name, d, l in cases:
        print(f"== {name} ==")
        one = simulate_hops(d, l, 1, args.seed, args.reps)
        deep = simulate_hops(d, l, args.hops, args.seed, args.reps)
        print(f"  d_end quantiles, hop 1 : "
              + " ".join(f"{q:.3f}" for q in np.quantile(one["d_end"], qs)))
        print(f"  d_end quantiles, hop {args.hops}: "
              + " ".join(f"{q:.3f}" for q in np.quantile(deep["d_end"], qs)))

        moments = estimate_limit_moments(d, l, args.reps, CounterStream(args.seed + 1))
        print(f"  hop-{args.hops} mean d_end = {np.mean(deep['d_end']):.4f}"
              f"  vs limit E[D_inf] = {moments['E_D_infinity'][0]:.4f}"
              f" +- {moments['E_D_infinity'][1]:.4f}")
        print(f"  limit E[tau_inf] = {moments['E_tau_infinity'][0]:.3f},"
              f" E[nu_inf] = {moments['E_nu_infinity'][0]:.3f}")

        w = generate_renewal(d, 4000, seed=args.seed, mark_law=l)
        recs, _ = run_checkpointing(w, 2000)
        est, companion = checkpoint_efficiency(recs, burn_in=200)
        print(f"  chain efficiency = {est.ratio:.4f} ({est.trend}),"
              f" post-burn-in companion = {companion:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
