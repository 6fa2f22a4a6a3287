#!/usr/bin/env python3

#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import time
import argparse

from fwreg.common import *
from fwreg.sim.lab import ExperimentConfig, run_replications, results_frame, rate_slopes

# Main ---------------------------------------------------------------------------------------------

def main():
    parser = argparse.ArgumentParser(description="Full-data FW rate on a smooth target")
    parser.add_argument("--smoothness",   default=2.0,   type=float, help="Target smoothness alpha")
    parser.add_argument("--basis",        default=BASIS_TRIGONOMETRIC, help="Basis family")
    parser.add_argument("--n-grid",       default="250,500,1000,2000,4000,8000", help="Sample sizes")
    parser.add_argument("--replications", default=50,    type=int,   help="Replications per n")
    parser.add_argument("--threads",      default=1,     type=int,   help="Worker threads")
    parser.add_argument("--seed",         default=0,     type=int,   help="Master seed")
    parser.add_argument("--out",          default=None,              help="Optional results CSV")
    args = parser.parse_args()

    config = ExperimentConfig(
        dgp          = DGP_SMOOTH,
        estimators   = (ESTIMATOR_FW, ESTIMATOR_LS),
        n_grid       = tuple(int(n) for n in args.n_grid.split(",")),
        replications = args.replications,
        basis        = args.basis,
        smoothness   = args.smoothness,
        seed         = args.seed,
        threads      = args.threads,
    )
    start = time.perf_counter()
    frame = results_frame(run_replications(config))
    if args.out is not None:
        frame.to_csv(args.out, index=False)

    theory = -2*args.smoothness/(2*args.smoothness + 1)
    print(frame.groupby(["estimator", "n"])["mse"].mean().unstack("estimator").to_string())
    print()
    print(rate_slopes(frame).to_string(index=False))
    print()
    print("theoretical slope: {:.3f}".format(theory))
    print("elapsed:           {:.1f}s".format(time.perf_counter() - start))

if __name__ == "__main__":
    main()
