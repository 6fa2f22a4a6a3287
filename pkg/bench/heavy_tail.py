#!/usr/bin/env python3

#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import argparse

from fwreg.common import *
from fwreg.sim.lab import ExperimentConfig, run_replications, results_frame

# Main ---------------------------------------------------------------------------------------------

def main():
    parser = argparse.ArgumentParser(description="FW against LS series on a heavy-tailed covariate")
    parser.add_argument("--n",            default=400,  type=int, help="Sample size")
    parser.add_argument("--replications", default=200,  type=int, help="Replications")
    parser.add_argument("--basis",        default=BASIS_BSPLINE,  help="Basis family shared by both")
    parser.add_argument("--threads",      default=1,    type=int, help="Worker threads")
    parser.add_argument("--seed",         default=0,    type=int, help="Master seed")
    args = parser.parse_args()

    config = ExperimentConfig(
        dgp          = DGP_HEAVY_TAIL,
        estimators   = (ESTIMATOR_FW, ESTIMATOR_LS),
        n_grid       = (args.n,),
        replications = args.replications,
        basis        = args.basis,
        seed         = args.seed,
        threads      = args.threads,
    )
    frame = results_frame(run_replications(config))
    mse   = frame.pivot(index="replication", columns="estimator", values="mse")
    wins  = (mse[ESTIMATOR_FW] < mse[ESTIMATOR_LS]).mean()

    print(mse.describe().to_string(float_format="{:.5f}".format))
    print()
    print("fw wins: {:.1%} of {} replications".format(wins, len(mse)))

if __name__ == "__main__":
    main()
