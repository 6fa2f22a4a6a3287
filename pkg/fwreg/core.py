#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import logging
from dataclasses import dataclass, fields
from functools import cached_property

import numpy as np

from fwreg.common import *
from fwreg.solve import SymmetricPseudoInverse
from fwreg.basis import BasisSpec, make_basis, evaluate_matrix

logger = logging.getLogger(__name__)

# FW Model -----------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FWModel:
    """Sufficient statistics of one Forster-Warmuth regression at truncation J."""
    basis         : object
    J             : int
    gram          : np.ndarray
    moment        : np.ndarray
    n             : int
    second_moment : float

    @cached_property
    def gram_inverse(self):
        return SymmetricPseudoInverse(self.gram)

    @cached_property
    def ls_coefficients(self):
        return self.gram_inverse.solve(self.moment)


def fit(design, responses, basis=None):
    design    = np.asarray(design, dtype=float)
    responses = np.asarray(responses, dtype=float).ravel()
    if design.ndim != 2:
        raise ShapeError("Design must be a matrix, got shape {}".format(design.shape))
    if design.shape[0] != responses.shape[0]:
        raise ShapeError("Design has {} rows but {} responses".format(design.shape[0], responses.shape[0]))
    if design.shape[1] < 1:
        raise ShapeError("Design needs J >= 1 columns")
    n = design.shape[0]
    return FWModel(
        basis         = basis,
        J             = design.shape[1],
        gram          = design.T @ design,
        moment        = design.T @ responses,
        n             = n,
        second_moment = float(responses @ responses/n) if n > 0 else 0.0,
    )


def _check_phi(model, phi):
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != model.J:
        raise ShapeError("Expected basis vectors of length {}, got {}".format(model.J, phi.shape[-1]))
    return phi


def _clamp_leverage(h):
    h = np.asarray(h, dtype=float)
    if np.any(h < -LEVERAGE_ROUNDOFF) or np.any(h > 1 + LEVERAGE_ROUNDOFF):
        raise NumericalConsistencyError("Leverage outside [0, 1] beyond round-off")
    return np.clip(h, 0.0, 1.0)

# Pointwise Evaluation -----------------------------------------------------------------------------

def _augmented(model, phi):
    inverse = SymmetricPseudoInverse(model.gram + np.outer(phi, phi))
    h       = float(_clamp_leverage(inverse.quadratic(phi)[0]))
    return h, float(phi @ inverse.solve(model.moment))


def leverage(model, phi_x):
    """h_n(x) = phi^T (G + phi phi^T)^- phi."""
    phi = _check_phi(model, phi_x)
    return _augmented(model, phi)[0]


def predict(model, phi_x):
    phi = _check_phi(model, phi_x)
    h, fitted = _augmented(model, phi)
    return (1 - h)*fitted


def predict_ls(model, phi_x):
    phi = _check_phi(model, phi_x)
    return float(phi @ model.ls_coefficients)


def augmented_ls_predict(design, responses, phi_x):
    """Least-squares series prediction at x after appending the observation (x, 0)."""
    phi       = np.asarray(phi_x, dtype=float)
    design    = np.vstack([np.asarray(design, dtype=float), phi])
    responses = np.append(np.asarray(responses, dtype=float), 0.0)
    return predict_ls(fit(design, responses), phi)

# Vectorized Evaluation ----------------------------------------------------------------------------

def leverage_many(model, design):
    design = np.atleast_2d(_check_phi(model, design))
    if model.gram_inverse.well_conditioned:
        ell = model.gram_inverse.quadratic(design)
        return _clamp_leverage(ell/(1 + ell))
    return np.array([_augmented(model, phi)[0] for phi in design])


def predict_many(model, design):
    design = np.atleast_2d(_check_phi(model, design))
    if model.gram_inverse.well_conditioned:
        # Sherman-Morrison: FW = LS/(1 + l)^2 with l = phi^T G^-1 phi.
        ell = model.gram_inverse.quadratic(design)
        return (design @ model.ls_coefficients)/(1 + ell)**2
    out = np.empty(design.shape[0])
    for i, phi in enumerate(design):
        h, fitted = _augmented(model, phi)
        out[i]    = (1 - h)*fitted
    return out


def predict_ls_many(model, design):
    design = np.atleast_2d(_check_phi(model, design))
    return design @ model.ls_coefficients


def pointwise_variance(model, phi_x, sigma2_pseudo):
    """Homoscedastic series variance l(x)*sigma2 and its 95% half-width."""
    phi      = _check_phi(model, phi_x)
    ell      = model.gram_inverse.quadratic(np.atleast_2d(phi))
    variance = np.maximum(ell, 0.0)*float(sigma2_pseudo)
    half     = CI_Z_95*np.sqrt(variance)
    if phi.ndim == 1:
        return float(variance[0]), float(half[0])
    return variance, half

# Risk Bound ---------------------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskBoundInputs:
    sigma2  : float
    kappa   : float
    gamma_J : float
    J       : int
    n       : int

    def __post_init__(self):
        if min(self.sigma2, self.kappa, self.gamma_J) < 0:
            raise ValueError("Risk bound inputs must be nonnegative")
        if self.J < 1 or self.n < 1:
            raise ValueError("Risk bound needs J, n >= 1")


def risk_bound(inputs):
    return 2*inputs.sigma2*inputs.J/inputs.n + inputs.kappa*inputs.gamma_J**2


def optimal_J(sigma2, n, gamma, cap=BASIS_MAX_J_CAP):
    """First k with gamma(k)^2 <= sigma2*k/n."""
    for k in range(1, cap + 1):
        if gamma(k)**2 <= sigma2*k/n:
            return k
    raise CapError("No truncation up to {} balances approximation and variance".format(cap))

# Predictors ---------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SeriesPredictor:
    model     : FWModel
    estimator : str = ESTIMATOR_FW

    def __call__(self, covariates):
        design = evaluate_matrix(self.model.basis, self.model.J, covariates)
        if self.estimator == ESTIMATOR_LS:
            return predict_ls_many(self.model, design)
        return predict_many(self.model, design)


@dataclass(frozen=True, eq=False)
class AveragedPredictor:
    """Pointwise average of series predictors, plus the pseudo-outcomes they were fitted to.

    ``split_sizes`` is (nuisance, estimation) records of the first split and ``nuisances`` names the
    nuisances fitted there.
    """
    members     : tuple
    covariates  : np.ndarray = None
    pseudo      : np.ndarray = None
    split_sizes : tuple      = None
    nuisances   : tuple      = ()

    def __call__(self, covariates):
        return np.mean([member(covariates) for member in self.members], axis=0)

    @property
    def models(self):
        return tuple(member.model for member in self.members)

    @property
    def selected(self):
        return tuple(model.J for model in self.models)

    @property
    def basis(self):
        return self.models[0].basis

    def interval(self, covariates):
        """Estimate, variance and 95% interval at ``covariates``."""
        if self.covariates is None or self.pseudo is None:
            raise ValueError("Predictor carries no pseudo-outcomes for a variance estimate")
        values, counts = np.unique(self.selected, return_counts=True)
        J        = int(values[np.argmax(counts)])
        model    = fit(evaluate_matrix(self.basis, J, self.covariates), self.pseudo, self.basis)
        design   = evaluate_matrix(self.basis, J, covariates)
        estimate = self(covariates)
        variance, half = pointwise_variance(model, design, np.var(self.pseudo))
        return estimate, variance, estimate - half, estimate + half


def _as_basis(basis, covariates):
    if isinstance(basis, BasisSpec):
        return make_basis(basis, covariates)
    return basis


def _fit_series(basis, J, covariates, responses, estimator):
    if estimator not in (ESTIMATOR_FW, ESTIMATOR_LS):
        raise RegistryError("Unknown series estimator {!r}".format(estimator))
    model = fit(evaluate_matrix(basis, J, covariates), responses, basis)
    return SeriesPredictor(model, estimator)

# Cross-Validation ---------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CVResult:
    selected  : tuple           # Selected J per repeat.
    J_grid    : tuple
    losses    : np.ndarray      # K x len(J_grid) mean squared validation errors.
    predictor : AveragedPredictor


def _is_nested(basis):
    return basis.spec.dim == 1 and basis.spec.family in (BASIS_POLYNOMIAL, BASIS_TRIGONOMETRIC)


def select_J_cv(covariates, responses, basis, J_grid=None, K=CV_DEFAULT_REPEATS,
    split_fraction=CV_DEFAULT_SPLIT_FRACTION, seed=None, estimator=ESTIMATOR_FW):
    """Split-sample cross-validation of the truncation J, averaging the K selected models."""
    covariates = np.asarray(covariates, dtype=float)
    responses  = np.asarray(responses, dtype=float).ravel()
    basis      = _as_basis(basis, covariates)
    n          = responses.shape[0]
    if K < 1:
        raise ConfigError("K must be >= 1")
    if not 0 < split_fraction < 1:
        raise SplitError("split_fraction must lie in (0, 1)")
    n_fit = int(round(split_fraction*n))
    if n_fit < 1 or n - n_fit < 1:
        raise SplitError("Cannot split {} samples into fit/validation parts".format(n))
    if J_grid is None:
        J_grid = range(1, max(min(n_fit//2, basis.max_J), 1) + 1)
    J_grid = tuple(sorted(set(int(J) for J in J_grid)))
    if not J_grid:
        raise GridError("Empty J grid")
    if J_grid[0] < 1 or J_grid[-1] > basis.max_J:
        raise TruncationError("J grid {}..{} outside [1, {}]".format(J_grid[0], J_grid[-1], basis.max_J))

    # # #

    rng      = np.random.default_rng(seed)
    losses   = np.empty((K, len(J_grid)))
    selected = []
    members  = []
    for k in range(K):
        perm     = rng.permutation(n)
        fit_idx  = perm[:n_fit]
        val_idx  = perm[n_fit:]
        x_fit, y_fit = covariates[fit_idx], responses[fit_idx]
        x_val, y_val = covariates[val_idx], responses[val_idx]
        if _is_nested(basis):
            full_fit = evaluate_matrix(basis, J_grid[-1], x_fit)
            full_val = evaluate_matrix(basis, J_grid[-1], x_val)
        models = []
        for j, J in enumerate(J_grid):
            if _is_nested(basis):
                design_fit, design_val = full_fit[:, :J], full_val[:, :J]
            else:
                design_fit = evaluate_matrix(basis, J, x_fit)
                design_val = evaluate_matrix(basis, J, x_val)
            model = fit(design_fit, y_fit, basis)
            if estimator == ESTIMATOR_LS:
                pred = predict_ls_many(model, design_val)
            else:
                pred = predict_many(model, design_val)
            losses[k, j] = np.mean((pred - y_val)**2)
            models.append(model)
        best = int(np.argmin(losses[k]))
        selected.append(J_grid[best])
        members.append(SeriesPredictor(models[best], estimator))
        logger.debug("CV repeat %d: selected J=%d (loss %.6g)", k, J_grid[best], losses[k, best])

    return CVResult(
        selected  = tuple(selected),
        J_grid    = J_grid,
        losses    = losses,
        predictor = AveragedPredictor(tuple(members), covariates, responses),
    )

# Split / Cross-Fit Drivers ------------------------------------------------------------------------

def _fit_target(records, pseudo, basis, J, J_grid, K, seed, estimator):
    covariates = records.covariates
    if J is not None:
        return (_fit_series(basis, J, covariates, pseudo, estimator),)
    cv = select_J_cv(covariates, pseudo, basis, J_grid=J_grid, K=K, seed=seed, estimator=estimator)
    return cv.predictor.members


def crossfit(records, plan, basis, J=None, n_folds=CROSSFIT_DEFAULT_FOLDS, seed=None, folds=None,
    J_grid=None, K=CV_DEFAULT_REPEATS, estimator=ESTIMATOR_FW):
    """Cross-fitted FW regression of pseudo-outcomes, averaged over folds.

    For each fold the nuisances are fitted on its complement, pseudo-outcomes are built on the fold
    and the series regression is fitted on the fold. ``J=None`` selects J by CV within each fold.
    """
    n = len(records)
    if folds is None:
        if n_folds < 2:
            raise FoldSizeError("Cross-fitting needs n_folds >= 2")
        rng   = np.random.default_rng(seed)
        folds = rng.permutation(n) % n_folds
    folds  = np.asarray(folds)
    labels = np.unique(folds)
    if folds.shape[0] != n:
        raise ShapeError("Fold assignment has {} entries for {} records".format(folds.shape[0], n))
    if labels.size < 2:
        raise FoldSizeError("Cross-fitting needs at least two folds")
    basis = _as_basis(basis, records.covariates)

    # # #

    children = np.random.SeedSequence(seed).spawn(labels.size)
    members  = []
    pseudo   = np.empty(n)
    for label, child in zip(labels, children):
        inside  = np.flatnonzero(folds == label)
        outside = np.flatnonzero(folds != label)
        if min(inside.size, outside.size) < plan.min_fit_size:
            raise FoldSizeError("Fold {} too small ({} / {} records)".format(label, inside.size, outside.size))
        nuisances      = plan.fit(records.take(outside))
        fold_records   = records.take(inside)
        pseudo[inside] = plan.pseudo(fold_records, nuisances)
        members.extend(_fit_target(fold_records, pseudo[inside], basis, J, J_grid, K, child, estimator))
        logger.debug("Cross-fit fold %s: %d records", label, inside.size)
    return AveragedPredictor(tuple(members), records.covariates, pseudo)


def split_fit(records, plan, basis, J=None, J_grid=None, K=CV_DEFAULT_REPEATS,
    split_fraction=CV_DEFAULT_SPLIT_FRACTION, seed=None, split=True, repeats=1, estimator=ESTIMATOR_FW):
    """Two-step estimator: nuisances on one part, pseudo-outcomes and FW on the other.

    ``split=False`` fits nuisances and FW on the full sample. ``repeats`` averages independent splits;
    the returned pseudo-outcomes are those of the first split.
    """
    n = len(records)
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    basis = _as_basis(basis, records.covariates)

    # # #

    children = np.random.SeedSequence(seed).spawn(repeats)
    members  = []
    first    = None
    for child in children:
        rng = np.random.default_rng(child)
        if split:
            n_nuisance = int(round(split_fraction*n))
            if min(n_nuisance, n - n_nuisance) < plan.min_fit_size:
                raise SplitError("Cannot split {} records into nuisance/estimation parts".format(n))
            perm = rng.permutation(n)
            nuisance_idx, target_idx = np.sort(perm[:n_nuisance]), np.sort(perm[n_nuisance:])
        else:
            nuisance_idx = target_idx = np.arange(n)
        nuisances = plan.fit(records.take(nuisance_idx))
        target    = records.take(target_idx)
        pseudo    = plan.pseudo(target, nuisances)
        members.extend(_fit_target(target, pseudo, basis, J, J_grid, K, rng.integers(2**63), estimator))
        if first is None:
            fitted = tuple(f.name for f in fields(nuisances) if getattr(nuisances, f.name) is not None)
            first  = (target.covariates, pseudo, (nuisance_idx.size, target_idx.size), fitted)
    logger.info("Split fit: %d repeats, %d models", repeats, len(members))
    return AveragedPredictor(tuple(members), *first)
