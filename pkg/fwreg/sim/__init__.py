#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

from fwreg.sim.dgp import DGPSpec, generate
from fwreg.sim.lab import ExperimentConfig, run_replications, rate_slope
