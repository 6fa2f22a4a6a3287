#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

"""Fundamental sequences of basis functions (phi_1 = 1, phi_2, ...) for series estimators."""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from fwreg.common import *

# Spec ---------------------------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisSpec:
    family  : str            = BASIS_POLYNOMIAL
    domain  : tuple          = None   # ((lo, hi), ...) per covariate, None: from data / unbounded.
    dim     : int            = 1
    mode    : str            = MODE_ADDITIVE
    cap     : int            = 64     # Tensor mode only.
    degree  : int            = 3      # B-spline degree.
    order   : int            = 0      # Partition local polynomial order.
    n_knots : int            = None   # Max interior knots, None: min(#distinct - 2, 30).

    def __post_init__(self):
        if self.family not in BASIS_FAMILIES:
            raise ValueError("Unknown basis family {!r}".format(self.family))
        if self.mode not in (MODE_ADDITIVE, MODE_TENSOR):
            raise ValueError("Unknown multivariate mode {!r}".format(self.mode))
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.family == BASIS_BSPLINE and self.degree < 1:
            raise ValueError("B-spline degree must be >= 1")
        if self.family == BASIS_PARTITION and self.order < 0:
            raise ValueError("Partition order must be >= 0")
        if self.mode == MODE_TENSOR and self.cap < 1:
            raise ValueError("Tensor cap must be >= 1")
        if self.n_knots is not None and self.n_knots < 0:
            raise ValueError("n_knots must be >= 0")
        if self.domain is not None:
            domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
            if len(domain) != self.dim:
                raise ValueError("domain needs one interval per covariate")
            for lo, hi in domain:
                if not lo < hi:
                    raise ValueError("Degenerate domain interval [{}, {}]".format(lo, hi))
            object.__setattr__(self, "domain", domain)

    @property
    def needs_knots(self):
        return self.family in (BASIS_BSPLINE, BASIS_NATURAL_SPLINE, BASIS_PARTITION)

# Sequence -----------------------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisSequence:
    spec        : BasisSpec
    knots       : tuple                             # Interior knots at max resolution, per covariate.
    max_J       : int
    domain      : tuple                             # Effective domain (None entries: unbounded).
    knot_table  : tuple = field(default=(), repr=False)
    sizes       : tuple = field(default=(), repr=False)

    def univariate(self, j, x, size):
        """Columns 1..size of the sub-basis of covariate ``j`` (column 0 is the constant)."""
        return _univariate(self.spec, self.domain[j], self.knot_table[j], x, size)


def _quantile_knots(values, count, lo, hi):
    if count == 0:
        return np.zeros(0)
    levels = np.arange(1, count + 1)/(count + 1)
    knots  = np.quantile(values, levels)
    if np.all(np.diff(knots) > 0) and knots[0] > lo and knots[-1] < hi:
        return knots
    unique = np.unique(values)
    knots  = np.quantile(unique, levels)
    if not (np.all(np.diff(knots) > 0) and knots[0] > lo and knots[-1] < hi):
        raise DegenerateKnotsError("Cannot place {} strictly increasing knots".format(count))
    return knots


def _univariate_max(spec, n_interior):
    if spec.family in (BASIS_POLYNOMIAL, BASIS_TRIGONOMETRIC):
        return BASIS_MAX_J_CAP
    if spec.family == BASIS_BSPLINE:
        return n_interior + spec.degree + 1
    if spec.family == BASIS_NATURAL_SPLINE:
        return n_interior + 2
    return (n_interior + 1)*(spec.order + 1)


def make_basis(spec, covariates=None):
    """Build a ``BasisSequence`` from ``spec``, placing knots at quantiles of ``covariates``."""
    xs = None
    if covariates is not None:
        xs = np.asarray(covariates, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        if xs.shape[1] != spec.dim:
            raise ShapeError("Expected {} covariate columns, got {}".format(spec.dim, xs.shape[1]))
    if (spec.needs_knots or (spec.family == BASIS_TRIGONOMETRIC and spec.domain is None)):
        if xs is None or xs.shape[0] < 1:
            raise DegenerateKnotsError("{} basis needs training covariates".format(spec.family))

    # Domain.
    domain = []
    for j in range(spec.dim):
        if spec.domain is not None:
            domain.append(spec.domain[j])
        elif spec.family == BASIS_POLYNOMIAL:
            domain.append(None)
        else:
            lo, hi = float(xs[:, j].min()), float(xs[:, j].max())
            if not lo < hi:
                raise DegenerateKnotsError("Covariate {} is constant".format(j))
            domain.append((lo, hi))

    # Knots.
    knots, table, sizes = [], [], []
    for j in range(spec.dim):
        if not spec.needs_knots:
            knots.append(np.zeros(0))
            table.append(())
            sizes.append(BASIS_MAX_J_CAP)
            continue
        lo, hi   = domain[j]
        values   = np.clip(xs[:, j], lo, hi)
        distinct = np.unique(values).size
        if spec.n_knots is None:
            n_interior = max(min(distinct - 2, BASIS_DEFAULT_MAX_KNOTS), 0)
        else:
            n_interior = spec.n_knots
            if distinct - 2 < n_interior:
                raise DegenerateKnotsError(
                    "{} distinct values cannot support {} knots".format(distinct, n_interior))
        row = tuple(_quantile_knots(values, k, lo, hi) for k in range(n_interior + 1))
        knots.append(row[-1])
        table.append(row)
        sizes.append(_univariate_max(spec, n_interior))

    # Truncation range.
    if spec.mode == MODE_ADDITIVE:
        max_J = 1 + sum(s - 1 for s in sizes)
    else:
        max_J = min(spec.cap, int(np.prod([float(s) for s in sizes])))
    max_J = min(max_J, BASIS_MAX_J_CAP)

    return BasisSequence(
        spec       = spec,
        knots      = tuple(knots),
        max_J      = int(max_J),
        domain     = tuple(domain),
        knot_table = tuple(table),
        sizes      = tuple(sizes),
    )

# Univariate Families ------------------------------------------------------------------------------

def _polynomial(x, size):
    return np.vander(x, size, increasing=True)


def _trigonometric(x, size, lo, hi):
    u    = 2*(x - lo)/(hi - lo) - 1
    cols = [np.ones_like(u)]
    for k in range(1, size):
        freq = (k + 1)//2
        cols.append(np.cos(np.pi*freq*u) if k % 2 == 1 else np.sin(np.pi*freq*u))
    return np.column_stack(cols)


def bspline_design(x, lo, hi, interior, degree):
    """Full B-spline design matrix (partition of unity on [lo, hi])."""
    t = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    return BSpline.design_matrix(x, t, degree).toarray()


def _bspline(x, size, lo, hi, table, degree):
    if size == 1:
        return np.ones((x.size, 1))
    if size <= degree + 1:
        full = bspline_design(x, lo, hi, np.zeros(0), size - 1)
    else:
        full = bspline_design(x, lo, hi, table[size - degree - 1], degree)
    # Drop the redundant first function, the intercept restores full rank.
    return np.column_stack([np.ones(x.size), full[:, 1:]])


def _natural_spline(x, size, lo, hi, table):
    s = (x - lo)/(hi - lo)
    if size <= 2:
        return np.column_stack([np.ones_like(s), s])[:, :size]
    xi = np.concatenate([[0.0], (table[size - 2] - lo)/(hi - lo), [1.0]])
    def d(k):
        return (np.maximum(s - xi[k], 0)**3 - np.maximum(s - xi[-1], 0)**3)/(xi[-1] - xi[k])
    last = d(size - 2)
    cols = [np.ones_like(s), s] + [d(k) - last for k in range(size - 2)]
    return np.column_stack(cols)


def _partition(x, size, lo, hi, table, order):
    cells  = -(-size//(order + 1))
    breaks = table[cells - 1]
    edges  = np.concatenate([[lo], breaks, [hi]])
    cell   = np.clip(np.searchsorted(breaks, x, side="right"), 0, cells - 1)
    center = 0.5*(edges[:-1] + edges[1:])
    half   = 0.5*(edges[1:] - edges[:-1])
    cols   = [np.ones(x.size)]
    cols  += [(cell == c).astype(float) for c in range(1, cells)]
    local  = (x - center[cell])/half[cell]
    for k in range(1, order + 1):
        cols += [np.where(cell == c, local**k, 0.0) for c in range(cells)]
    return np.column_stack(cols)[:, :size]


def _univariate(spec, domain, table, x, size):
    if domain is not None:
        lo, hi = domain
        x = np.clip(x, lo, hi)
    if spec.family == BASIS_POLYNOMIAL:
        return _polynomial(x, size)
    if spec.family == BASIS_TRIGONOMETRIC:
        return _trigonometric(x, size, lo, hi)
    if spec.family == BASIS_BSPLINE:
        return _bspline(x, size, lo, hi, table, spec.degree)
    if spec.family == BASIS_NATURAL_SPLINE:
        return _natural_spline(x, size, lo, hi, table)
    return _partition(x, size, lo, hi, table, spec.order)

# Multivariate Allocation --------------------------------------------------------------------------

def additive_allocation(sizes, J):
    """Round-robin allocation of the J - 1 non-constant functions over covariates."""
    counts = [0]*len(sizes)
    left   = J - 1
    while left > 0:
        for j, s in enumerate(sizes):
            if left > 0 and counts[j] < s - 1:
                counts[j] += 1
                left      -= 1
    return counts


def tensor_indices(sizes, J):
    """First J multi-indices ordered by total degree, then lexicographically."""
    m = 1
    while np.prod([min(m, s) for s in sizes]) < J:
        m += 1
    grid = itertools.product(*[range(min(m, s)) for s in sizes])
    return sorted(grid, key=lambda idx: (sum(idx), idx))[:J]

# Evaluation ---------------------------------------------------------------------------------------

def _check_truncation(basis, J):
    if not 1 <= J <= basis.max_J:
        raise TruncationError("J={} outside [1, {}]".format(J, basis.max_J))


def evaluate_matrix(basis, J, xs):
    """Row-wise evaluation of the first J basis functions: an (n, J) design matrix."""
    J = int(J)
    _check_truncation(basis, J)
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None] if basis.spec.dim == 1 else xs[None, :]
    if xs.shape[1] != basis.spec.dim:
        raise ShapeError("Expected {} covariate columns, got {}".format(basis.spec.dim, xs.shape[1]))
    n = xs.shape[0]
    if basis.spec.mode == MODE_ADDITIVE or basis.spec.dim == 1:
        counts = additive_allocation(basis.sizes, J)
        cols   = [np.ones((n, 1))]
        for j, c in enumerate(counts):
            if c > 0:
                cols.append(basis.univariate(j, xs[:, j], c + 1)[:, 1:])
        return np.hstack(cols)
    indices = tensor_indices(basis.sizes, J)
    width   = [max(idx[j] for idx in indices) + 1 for j in range(basis.spec.dim)]
    subs    = [basis.univariate(j, xs[:, j], width[j]) for j in range(basis.spec.dim)]
    out     = np.ones((n, J))
    for col, idx in enumerate(indices):
        for j, k in enumerate(idx):
            out[:, col] *= subs[j][:, k]
    return out


def evaluate(basis, J, x):
    """phi_J(x) for a single covariate point."""
    point = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    return evaluate_matrix(basis, J, point)[0]
