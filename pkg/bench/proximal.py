#!/usr/bin/env python3

#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import time
import argparse

import numpy as np

from fwreg.common import *
from fwreg.basis import BasisSpec
from fwreg.core import split_fit
from fwreg.frontend.nuisance import features, fit_outcome_bridge
from fwreg.frontend.plans import PseudoPlan
from fwreg.sim.dgp import DGPSpec, generate

# Bridge Recovery ----------------------------------------------------------------------------------

def bridge_errors(n, seed):
    """Max error of the outcome bridge fitted on noiseless targets, RMS error on noisy outcomes."""
    sim = generate(DGPSpec(DGP_PROXIMAL, n, seed))
    rec = sim.records
    f   = features(rec.w, rec.a, rec.x)
    exact = sim.truth.h_bridge(f)
    clean = fit_outcome_bridge(rec.z, rec.w, rec.a, rec.x, exact, seed=seed)
    noisy = fit_outcome_bridge(rec.z, rec.w, rec.a, rec.x, rec.y, seed=seed)
    return float(np.max(np.abs(clean(f) - exact))), float(np.sqrt(np.mean((noisy(f) - exact)**2)))

# Coverage -----------------------------------------------------------------------------------------

def coverage(n, replications, seed, grid):
    """Fraction of replications whose pointwise interval holds the constant effect, per grid point."""
    hits = np.zeros(len(grid))
    for k in range(replications):
        sim  = generate(DGPSpec(DGP_PROXIMAL, n, seed + k))
        pred = split_fit(sim.records, PseudoPlan(SETTING_PROXIMAL, seed=seed + k), BasisSpec(), J=1,
            seed=seed + k)
        _, _, lower, upper = pred.interval(grid[:, None])
        truth = sim.truth.target(grid[:, None])
        hits += (lower <= truth) & (truth <= upper)
    return hits/replications

# Main ---------------------------------------------------------------------------------------------

def main():
    parser = argparse.ArgumentParser(description="Proximal bridge recovery and CATE interval coverage")
    parser.add_argument("--bridge-n",     default=5000, type=int, help="Sample size of the bridge check")
    parser.add_argument("--n",            default=2000, type=int, help="Sample size of the coverage runs")
    parser.add_argument("--replications", default=200,  type=int, help="Coverage replications")
    parser.add_argument("--seed",         default=0,    type=int, help="Seed")
    args = parser.parse_args()

    start = time.perf_counter()
    clean, noisy = bridge_errors(args.bridge_n, args.seed)
    print("outcome bridge, noiseless max error: {:.2e}".format(clean))
    print("outcome bridge, noisy RMS error:     {:.4f}".format(noisy))

    grid = np.linspace(-1, 1, 5)
    hits = coverage(args.n, args.replications, args.seed, grid)
    for x, c in zip(grid, hits):
        print("coverage at x={:+.1f}: {:.1%}".format(x, c))
    print("elapsed: {:.1f}s".format(time.perf_counter() - start))

if __name__ == "__main__":
    main()
