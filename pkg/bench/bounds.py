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
from fwreg.basis import BasisSpec, make_basis, evaluate_matrix
from fwreg.core import fit, leverage_many, predict_many, predict_ls_many, augmented_ls_predict

# Instances ----------------------------------------------------------------------------------------

FAMILIES = (BASIS_POLYNOMIAL, BASIS_TRIGONOMETRIC, BASIS_BSPLINE)

def random_instance(rng, max_J=20, max_n=200, n_eval=50):
    family = FAMILIES[rng.integers(len(FAMILIES))]
    n      = int(rng.integers(5, max_n + 1))
    x      = rng.uniform(-1, 1, n)
    y      = rng.standard_t(3, n)*rng.uniform(0.1, 10)
    spec   = BasisSpec(family=family, domain=((-1.0, 1.0),) if family != BASIS_POLYNOMIAL else None)
    basis  = make_basis(spec, x)
    J      = int(rng.integers(1, min(max_J, basis.max_J) + 1))
    x_eval = rng.uniform(-1.5, 1.5, n_eval)
    return evaluate_matrix(basis, J, x), y, evaluate_matrix(basis, J, x_eval)

# Checks -------------------------------------------------------------------------------------------

def check_bound(design, y, grid, slack=1e-10):
    """Violations of |pred| <= (1 - h) sqrt(h sum y^2) and of its h-free envelope."""
    model = fit(design, y)
    pred  = predict_many(model, grid)
    h     = leverage_many(model, grid)
    sharp = (1 - h)*np.sqrt(h*np.sum(y**2))
    # max of (1 - h) sqrt(h) over [0, 1] is 2/(3 sqrt 3), at h = 1/3.
    flat  = 2/(3*np.sqrt(3))*np.sqrt(np.sum(y**2))
    return int(np.sum(np.abs(pred) > sharp + slack)), int(np.sum(np.abs(pred) > flat + slack))


def check_identities(design, y, grid):
    """Augmentation and Sherman-Morrison identities; returns the worst relative error of each."""
    model = fit(design, y)
    pred  = predict_many(model, grid)
    h     = leverage_many(model, grid)
    aug   = np.array([augmented_ls_predict(design, y, phi) for phi in grid])
    scale = np.maximum(np.abs(pred), 1e-12)
    aug_err = float(np.max(np.abs(pred - (1 - h)*aug)/scale))
    sm_err  = 0.0
    if model.gram_inverse.well_conditioned:
        ell    = model.gram_inverse.quadratic(grid)
        sm_err = float(np.max(np.abs(pred - predict_ls_many(model, grid)/(1 + ell)**2)/scale))
    return aug_err, sm_err

# Main ---------------------------------------------------------------------------------------------

def main():
    parser = argparse.ArgumentParser(description="FW boundedness and identity checks on random instances")
    parser.add_argument("--instances", default=1000, type=int, help="Random instances")
    parser.add_argument("--seed",      default=0,    type=int, help="Master seed")
    args = parser.parse_args()

    rng   = np.random.default_rng(args.seed)
    start = time.perf_counter()
    sharp = envelope = 0
    worst_aug = worst_sm = 0.0
    for _ in range(args.instances):
        design, y, grid = random_instance(rng)
        a, b = check_bound(design, y, grid)
        sharp    += a
        envelope += b
        aug, sm = check_identities(design, y, grid)
        worst_aug = max(worst_aug, aug)
        worst_sm  = max(worst_sm, sm)

    print("instances:                {}".format(args.instances))
    print("leverage bound failures:  {}".format(sharp))
    print("envelope failures:        {}".format(envelope))
    print("augmentation rel. error:  {:.3g}".format(worst_aug))
    print("Sherman-Morrison error:   {:.3g}".format(worst_sm))
    print("elapsed:                  {:.2f}s".format(time.perf_counter() - start))

if __name__ == "__main__":
    main()
