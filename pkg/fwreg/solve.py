#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import numpy as np
from scipy import linalg

from fwreg.common import EIGEN_RELATIVE_THRESHOLD, EIGEN_FLOOR, WELL_CONDITIONED_RATIO

# Eigen Pseudo-Solve -------------------------------------------------------------------------------

class SymmetricPseudoInverse:
    """Minimum-norm solver for a symmetric positive semi-definite matrix.

    Eigenvalues below ``EIGEN_RELATIVE_THRESHOLD`` times the largest eigenvalue (floored at
    ``EIGEN_FLOOR``) are treated as null directions.
    """
    def __init__(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        matrix = 0.5*(matrix + matrix.T)
        self.size = matrix.shape[0]

        # # #

        if self.size == 0:
            self.eigenvalues  = np.zeros(0)
            self.eigenvectors = np.zeros((0, 0))
            self.threshold    = EIGEN_FLOOR
            self.keep         = np.zeros(0, dtype=bool)
            return
        w, v = linalg.eigh(matrix)
        self.eigenvalues  = w
        self.eigenvectors = v
        self.threshold    = EIGEN_RELATIVE_THRESHOLD*max(w[-1], EIGEN_FLOOR)
        self.keep         = w > self.threshold

    @property
    def rank(self):
        return int(self.keep.sum())

    @property
    def well_conditioned(self):
        if self.size == 0 or self.eigenvalues[-1] <= 0:
            return False
        return self.eigenvalues[0] > WELL_CONDITIONED_RATIO*self.eigenvalues[-1]

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        v   = self.eigenvectors[:, self.keep]
        w   = self.eigenvalues[self.keep]
        coords = v.T @ rhs
        if coords.ndim == 1:
            return v @ (coords/w)
        return v @ (coords/w[:, None])

    def quadratic(self, left, right=None):
        """Row-wise ``left_i^T A^- right_i`` for row-stacked vectors."""
        left  = np.atleast_2d(np.asarray(left, dtype=float))
        right = left if right is None else np.atleast_2d(np.asarray(right, dtype=float))
        v  = self.eigenvectors[:, self.keep]
        w  = self.eigenvalues[self.keep]
        pl = left @ v
        pr = right @ v
        return np.einsum("ij,ij->i", pl/w, pr)


def pseudo_solve(matrix, rhs):
    """Minimum-norm solution of ``matrix @ x = rhs`` for symmetric PSD ``matrix``."""
    return SymmetricPseudoInverse(matrix).solve(rhs)
