#!/usr/bin/env python3

#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import argparse

import numpy as np
from scipy.special import expit, logit

from fwreg.common import *
from fwreg.frontend.pseudo import NuisanceSet, conditional_bias_probe
from fwreg.sim.dgp import MARSelection, KennedyNullCATE

# Nuisance Variants --------------------------------------------------------------------------------

def const(value):
    return lambda f: np.full(np.asarray(f).shape[0], value)


def shifted_propensity(pi, delta):
    return lambda f: expit(logit(pi(f)) + delta)


def shifted(mu, delta):
    return lambda f: mu(f) + delta


def variants(setting, dgp, delta):
    """(label, NuisanceSet) pairs: one nuisance wrong, then both perturbed by ``delta``."""
    if setting == SETTING_MAR:
        return [
            ("pi true, mu wrong",  NuisanceSet(pi=dgp.pi, mu=const(0.0))),
            ("pi wrong, mu true",  NuisanceSet(pi=const(0.5), mu=dgp.mu)),
            ("both shifted",       NuisanceSet(pi=shifted_propensity(dgp.pi, delta), mu=shifted(dgp.mu, delta))),
        ]
    return [
        ("pi true, mu wrong",  NuisanceSet(pi=dgp.pi, mu0=const(0.0), mu1=const(1.0))),
        ("pi wrong, mu true",  NuisanceSet(pi=const(0.5), mu0=dgp.mu, mu1=dgp.mu)),
        ("both shifted",       NuisanceSet(pi=shifted_propensity(dgp.pi, delta),
            mu0=shifted(dgp.mu, -delta), mu1=shifted(dgp.mu, delta))),
    ]

# Main ---------------------------------------------------------------------------------------------

def main():
    parser = argparse.ArgumentParser(description="Conditional bias of pseudo-outcomes under wrong nuisances")
    parser.add_argument("--setting", default=SETTING_MAR, choices=(SETTING_MAR, SETTING_CATE), help="Setting")
    parser.add_argument("--mc-size", default=100000, type=int, help="Monte Carlo draws per grid point")
    parser.add_argument("--bins",    default=5,      type=int, help="Grid points on [-0.8, 0.8]")
    parser.add_argument("--seed",    default=0,      type=int, help="Seed")
    args = parser.parse_args()

    dgp  = MARSelection() if args.setting == SETTING_MAR else KennedyNullCATE()
    grid = np.linspace(-0.8, 0.8, args.bins)

    print("Single nuisance wrong (bias / se at each grid point):")
    for label, hat in variants(args.setting, dgp, 0.0)[:2]:
        probe = conditional_bias_probe(args.setting, dgp, hat, grid, args.mc_size, seed=args.seed)
        print("  {:<20} {}".format(label, " ".join("{:+.2f}".format(t) for t in probe.bias/probe.se)))

    print("Both nuisances shifted by delta (mean |bias|, mean |product bias|):")
    previous = None
    for delta in (0.1, 0.2, 0.4):
        _, hat = variants(args.setting, dgp, delta)[2]
        probe  = conditional_bias_probe(args.setting, dgp, hat, grid, args.mc_size, seed=args.seed)
        bias   = float(np.mean(np.abs(probe.bias)))
        growth = "" if previous is None else "  x{:.2f}".format(bias/previous)
        print("  delta={:.1f}  {:.5f}  {:.5f}{}".format(delta, bias, float(np.mean(np.abs(probe.predicted))), growth))
        previous = bias

if __name__ == "__main__":
    main()
