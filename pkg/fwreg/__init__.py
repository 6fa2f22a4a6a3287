#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

from fwreg.basis import BasisSpec, make_basis
from fwreg.core import fit, predict, select_J_cv, crossfit, split_fit
