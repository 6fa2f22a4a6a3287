#!/usr/bin/env python3

#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import argparse

from fwreg.common import *
from fwreg.sim.lab import ExperimentConfig, run_replications, results_frame, mse_ratios

# Main ---------------------------------------------------------------------------------------------

def main():
    parser = argparse.ArgumentParser(description="Shadow-variable FW against complete-case LS")
    parser.add_argument("--dgp",          default=DGP_SHADOW, choices=(DGP_SHADOW, DGP_MAR), help="Design")
    parser.add_argument("--n",            default=2000, type=int, help="Sample size")
    parser.add_argument("--replications", default=100,  type=int, help="Replications")
    parser.add_argument("--threads",      default=1,    type=int, help="Worker threads")
    parser.add_argument("--seed",         default=0,    type=int, help="Master seed")
    args = parser.parse_args()

    config = ExperimentConfig(
        dgp          = args.dgp,
        estimators   = (ESTIMATOR_FW, ESTIMATOR_ORACLE_DRL, ESTIMATOR_CC_LS),
        n_grid       = (args.n,),
        replications = args.replications,
        seed         = args.seed,
        threads      = args.threads,
    )
    frame  = results_frame(run_replications(config))
    ratios = mse_ratios(frame).set_index("estimator")

    print(ratios[["mse", "ratio"]].to_string(float_format="{:.5f}".format))
    print()
    print("complete-case / fw MSE: {:.2f}".format(ratios.loc[ESTIMATOR_CC_LS, "ratio"]))

if __name__ == "__main__":
    main()
