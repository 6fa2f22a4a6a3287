#!/usr/bin/env python3

#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import time
import argparse

from scipy import stats

from fwreg.common import *
from fwreg.sim.lab import ExperimentConfig, run_replications, results_frame, mse_ratios

ESTIMATOR_NAMES = (ESTIMATOR_ORACLE_DRL, ESTIMATOR_FW, ESTIMATOR_LS, ESTIMATOR_DRL_STUB, ESTIMATOR_PLUGIN,
    ESTIMATOR_XL)

# Main ---------------------------------------------------------------------------------------------

def main():
    parser = argparse.ArgumentParser(description="Null-CATE comparison under corrupted propensities")
    parser.add_argument("--n",            default=2000,  type=int, help="Sample size")
    parser.add_argument("--alpha-grid",   default="0.1,0.2,0.3,0.4,0.5", help="Propensity corruption rates")
    parser.add_argument("--replications", default=200,   type=int, help="Replications")
    parser.add_argument("--estimators",   default=",".join(ESTIMATOR_NAMES), help="Estimators")
    parser.add_argument("--threads",      default=1,     type=int, help="Worker threads")
    parser.add_argument("--seed",         default=0,     type=int, help="Master seed")
    parser.add_argument("--out",          default=None,            help="Optional results CSV")
    args = parser.parse_args()

    config = ExperimentConfig(
        dgp          = DGP_KENNEDY,
        estimators   = tuple(args.estimators.split(",")),
        n_grid       = (args.n,),
        alpha_grid   = tuple(float(a) for a in args.alpha_grid.split(",")),
        replications = args.replications,
        seed         = args.seed,
        threads      = args.threads,
    )
    start = time.perf_counter()
    frame = results_frame(run_replications(config))
    if args.out is not None:
        frame.to_csv(args.out, index=False)

    means = frame.groupby(["alpha", "estimator"])["mse"].mean().unstack("estimator")
    print(means.to_string(float_format="{:.5f}".format))
    print()
    print(mse_ratios(frame).pivot(index="alpha", columns="estimator", values="ratio").to_string(
        float_format="{:.3f}".format))
    if ESTIMATOR_FW in means and len(means) > 1:
        rho = stats.spearmanr(means.index, means[ESTIMATOR_FW]).correlation
        print()
        print("fw MSE vs alpha, Spearman rho: {:+.3f}".format(rho))
    print("elapsed: {:.1f}s".format(time.perf_counter() - start))

if __name__ == "__main__":
    main()
