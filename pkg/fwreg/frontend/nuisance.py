#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

"""Nuisance estimators: regressions, propensities and sieve bridge-function solutions.

Every fitted nuisance is an immutable callable taking an ``(n, k)`` feature matrix (the
column-stacked variables it depends on) and returning an ``(n,)`` vector.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats
from scipy.interpolate import make_smoothing_spline
from scipy.special import expit, logit
from sklearn.exceptions import ConvergenceWarning
from sklearn.neighbors import KNeighborsRegressor

from fwreg.common import *
from fwreg.solve import SymmetricPseudoInverse, pseudo_solve
from fwreg.basis import BasisSpec, make_basis, evaluate_matrix
from fwreg.core import select_J_cv

logger = logging.getLogger(__name__)


def features(*blocks):
    """Column-stack variable blocks (vectors or matrices) into an (n, k) feature matrix."""
    cols = [np.asarray(b, dtype=float) for b in blocks]
    cols = [c[:, None] if c.ndim == 1 else c for c in cols]
    return np.hstack(cols)


def _as_matrix(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x

# Regression ---------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Regressor:
    method : str
    model  : object
    dim    : int
    clip   : tuple = None

    def __call__(self, x):
        x = _as_matrix(x)
        if x.shape[1] != self.dim:
            raise ShapeError("Regressor expects {} feature columns, got {}".format(self.dim, x.shape[1]))
        if self.method == REGRESSION_KNN:
            out = self.model.predict(x)
        else:
            out = self.model(x)
        if self.clip is not None:
            out = np.clip(out, *self.clip)
        return np.asarray(out, dtype=float)


@dataclass(frozen=True, eq=False)
class _SmoothingSpline:
    spline : object
    lo     : float
    hi     : float

    def __call__(self, x):
        return self.spline(np.clip(x[:, 0], self.lo, self.hi))


def _fit_smoothing_spline(x, y, lam):
    if x.shape[1] != 1:
        raise FitError("Smoothing-spline regression is univariate, got {} columns".format(x.shape[1]))
    # Duplicated abscissae are merged into weighted means.
    xu, inverse, counts = np.unique(x[:, 0], return_inverse=True, return_counts=True)
    if xu.size < SMOOTHING_SPLINE_MIN_POINTS:
        raise FitError("Smoothing spline needs {} distinct points, got {}".format(
            SMOOTHING_SPLINE_MIN_POINTS, xu.size))
    ybar   = np.bincount(inverse, weights=y)/counts
    spline = make_smoothing_spline(xu, ybar, w=counts.astype(float), lam=lam)
    return _SmoothingSpline(spline, xu[0], xu[-1])


def fit_regression(x, y, method=REGRESSION_FW_SERIES, k=KNN_DEFAULT_K, lam=None, family=BASIS_BSPLINE,
    J_grid=None, K=CV_DEFAULT_REPEATS, seed=None, clip=None):
    """Fit a nonparametric regression of ``y`` on the feature matrix ``x``."""
    x = _as_matrix(x)
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise ShapeError("{} feature rows for {} responses".format(x.shape[0], y.shape[0]))
    if method not in REGRESSION_METHODS:
        raise RegistryError("Unknown regression method {!r}".format(method))
    n = y.shape[0]

    # # #

    if method == REGRESSION_KNN:
        if n < k:
            raise FitError("kNN with k={} needs at least {} samples, got {}".format(k, k, n))
        model = KNeighborsRegressor(n_neighbors=k).fit(x, y)
    elif method == REGRESSION_SMOOTHING_SPLINE:
        model = _fit_smoothing_spline(x, y, lam)
    else:
        if n < 2:
            raise FitError("Series regression needs at least 2 samples, got {}".format(n))
        estimator = ESTIMATOR_FW if method == REGRESSION_FW_SERIES else ESTIMATOR_LS
        try:
            basis = make_basis(BasisSpec(family=family, dim=x.shape[1]), x)
        except DegenerateKnotsError:
            basis = make_basis(BasisSpec(family=BASIS_POLYNOMIAL, dim=x.shape[1]), x)
        if J_grid is not None:
            J_grid = [J for J in J_grid if J <= basis.max_J] or [1]
        model = select_J_cv(x, y, basis, J_grid=J_grid, K=K, seed=seed, estimator=estimator).predictor
    logger.debug("Fitted %s regression on %d samples", method, n)
    return Regressor(method, model, x.shape[1], clip)

# Propensity ---------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PropensityModel:
    basis        : object
    J            : int
    coefficients : np.ndarray
    converged    : bool
    iterations   : int
    clip         : tuple = (PROPENSITY_CLIP_LOW, PROPENSITY_CLIP_HIGH)

    def __call__(self, x):
        design = evaluate_matrix(self.basis, self.J, _as_matrix(x))
        return np.clip(expit(design @ self.coefficients), *self.clip)


def fit_propensity(x, labels, degree=PROPENSITY_DEFAULT_DEGREE, spec=None, J=None):
    """Logistic regression on basis-expanded features, fitted by IRLS.

    The default expansion is additive polynomial of ``degree`` in every covariate.
    """
    x      = _as_matrix(x)
    labels = np.asarray(labels, dtype=float).ravel()
    if x.shape[0] != labels.shape[0]:
        raise ShapeError("{} feature rows for {} labels".format(x.shape[0], labels.shape[0]))
    if not np.all((labels == 0) | (labels == 1)):
        raise FitError("Propensity labels must be 0/1")
    if labels.size == 0 or labels.min() == labels.max():
        raise SeparationError("Propensity fit needs both labels present")
    if spec is None:
        spec = BasisSpec(family=BASIS_POLYNOMIAL, dim=x.shape[1])
        J    = 1 + degree*x.shape[1] if J is None else J
    basis  = make_basis(spec, x)
    J      = min(basis.max_J, J if J is not None else 1 + x.shape[1])
    design = evaluate_matrix(basis, J, x)

    # # #

    coef      = np.zeros(J)
    converged = False
    for iteration in range(1, IRLS_MAX_ITERATIONS + 1):
        p      = expit(design @ coef)
        weight = p*(1 - p)
        step   = pseudo_solve((design*weight[:, None]).T @ design, design.T @ (labels - p))
        coef   = coef + step
        if np.max(np.abs(step)) < IRLS_TOLERANCE:
            converged = True
            break
    if not converged:
        logger.warning("IRLS did not converge after %d iterations", iteration)
        warnings.warn("IRLS did not converge after {} iterations".format(iteration), ConvergenceWarning)
    return PropensityModel(basis, J, coef, converged, iteration)


@dataclass(frozen=True, eq=False)
class CorruptedPropensity:
    """expit(logit(pi) + epsilon) around a true propensity ``pi``."""
    pi      : object
    epsilon : float
    clip    : tuple = (PROPENSITY_CLIP_LOW, PROPENSITY_CLIP_HIGH)

    def __call__(self, x):
        p = np.clip(self.pi(x), 1e-12, 1 - 1e-12)
        return np.clip(expit(logit(p) + self.epsilon), *self.clip)


def corrupt_propensity(pi_true, alpha, n, seed=None):
    """Perturb ``pi_true`` on the logit scale with N(n^-alpha, sd n^-alpha), drawn once."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    scale   = float(n)**(-alpha)
    epsilon = np.random.default_rng(seed).normal(scale, scale)
    return CorruptedPropensity(pi_true, float(epsilon))

# Sieve NPIV Bridge --------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BridgeSolution:
    coefficients  : np.ndarray
    M             : int        # Instrument rank.
    J             : int
    lam           : float      # Scaled ridge weight actually used.
    objective     : float      # |P(t - Psi b)|^2 + lam |b|^2 at the solution.
    residual_norm : float      # |P(t - Psi b)|


def _ridge(instruments, endogenous, target, scales):
    q = linalg.orth(instruments)
    if q.shape[1] < endogenous.shape[1]:
        raise UnderIdentifiedError("Instrument rank {} below {} endogenous features".format(
            q.shape[1], endogenous.shape[1]))
    a    = q.T @ endogenous
    c    = q.T @ target
    gram = a.T @ a
    top  = SymmetricPseudoInverse(gram).eigenvalues[-1] if gram.size else 0.0
    out  = []
    for scale in scales:
        lam = scale*max(top, EIGEN_FLOOR)
        b   = pseudo_solve(gram + lam*np.eye(gram.shape[0]), a.T @ c)
        out.append((lam, b))
    return out


def _projected_residual(instruments, endogenous, target, b):
    q = linalg.orth(instruments)
    return float(np.sum((q.T @ (target - endogenous @ b))**2))


def fit_bridge_npiv(instruments, endogenous, target, lambda_grid=NPIV_LAMBDA_GRID, seed=None):
    """Ridge-regularized sieve minimum distance for E[target - Psi b | instruments] = 0.

    The ridge weight is picked from ``lambda_grid`` (relative to the top eigenvalue of the projected
    Gram) by 2-fold cross-validation of the projected residual.
    """
    instruments = _as_matrix(instruments)
    endogenous  = _as_matrix(endogenous)
    target      = np.asarray(target, dtype=float).ravel()
    n, J = endogenous.shape
    if instruments.shape[0] != n or target.shape[0] != n:
        raise ShapeError("Bridge blocks have mismatched row counts")
    if instruments.shape[1] < J:
        raise UnderIdentifiedError("{} instrument features for {} endogenous features".format(
            instruments.shape[1], J))
    lambda_grid = tuple(lambda_grid)

    # Ridge weight selection.
    choice = 0
    if len(lambda_grid) > 1:
        folds  = np.random.default_rng(seed).permutation(n) % 2
        losses = np.zeros(len(lambda_grid))
        try:
            for fold in (0, 1):
                train, valid = folds != fold, folds == fold
                fits = _ridge(instruments[train], endogenous[train], target[train], lambda_grid)
                for i, (_, b) in enumerate(fits):
                    losses[i] += _projected_residual(instruments[valid], endogenous[valid], target[valid], b)
            choice = int(np.argmin(losses))
        except UnderIdentifiedError:
            logger.warning("Bridge CV folds under-identified, using lambda grid entry 0")
            warnings.warn("Bridge CV folds under-identified, using lambda grid entry 0", ConvergenceWarning)

    # # #

    lam, b   = _ridge(instruments, endogenous, target, [lambda_grid[choice]])[0]
    residual = _projected_residual(instruments, endogenous, target, b)
    logger.debug("NPIV bridge: J=%d, lambda=%.3g, residual=%.3g", J, lam, residual)
    return BridgeSolution(
        coefficients  = b,
        M             = int(np.linalg.matrix_rank(instruments)),
        J             = J,
        lam           = float(lam),
        objective     = residual + float(lam*b @ b),
        residual_norm = float(np.sqrt(residual)),
    )

# Bridge Feature Maps ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolynomialFeatures:
    """Standardized additive polynomial features of ``degree``, optionally arm-interacted."""
    center : np.ndarray
    scale  : np.ndarray
    degree : int
    basis  : object

    @classmethod
    def fit(cls, x, degree):
        x      = _as_matrix(x)
        center = x.mean(axis=0)
        scale  = x.std(axis=0)
        scale  = np.where(scale > 0, scale, 1.0)
        basis  = make_basis(BasisSpec(family=BASIS_POLYNOMIAL, dim=x.shape[1]))
        return cls(center, scale, degree, basis)

    @property
    def size(self):
        return 1 + self.degree*self.center.size

    def __call__(self, x, arm=None):
        design = evaluate_matrix(self.basis, self.size, (_as_matrix(x) - self.center)/self.scale)
        if arm is None:
            return design
        arm = np.asarray(arm, dtype=float)[:, None]
        return np.hstack([(1 - arm)*design, arm*design])


def _instrument_degree(dim, arms, endogenous_size):
    degree = 1
    while arms*(1 + degree*dim) < NPIV_INSTRUMENT_RATIO*endogenous_size:
        degree += 1
    return degree


@dataclass(frozen=True, eq=False)
class OutcomeBridge:
    """h(w, a, x) evaluated on features [w, a, x]."""
    phi      : PolynomialFeatures
    dw       : int
    solution : BridgeSolution

    def __call__(self, f):
        f = _as_matrix(f)
        w, a, x = f[:, :self.dw], f[:, self.dw], f[:, self.dw + 1:]
        return self.phi(features(w, x), arm=a) @ self.solution.coefficients


@dataclass(frozen=True, eq=False)
class TreatmentBridge:
    """q(z, a, x) evaluated on features [z, a, x]."""
    psi       : PolynomialFeatures
    dz        : int
    solutions : tuple          # One per arm a = 0, 1.

    def __call__(self, f):
        f = _as_matrix(f)
        z, a, x = f[:, :self.dz], f[:, self.dz], f[:, self.dz + 1:]
        design = self.psi(features(z, x))
        q0 = design @ self.solutions[0].coefficients
        q1 = design @ self.solutions[1].coefficients
        return np.where(a == 1, q1, q0)


def fit_outcome_bridge(z, w, a, x, y, degree=NPIV_DEFAULT_DEGREE, lambda_grid=NPIV_LAMBDA_GRID, seed=None):
    """Outcome bridge: E[Y - h(W, A, X) | Z, A, X] = 0."""
    wx  = features(w, x)
    zx  = features(z, x)
    phi = PolynomialFeatures.fit(wx, degree)
    inst_degree = _instrument_degree(zx.shape[1], 2, 2*phi.size)
    inst = PolynomialFeatures.fit(zx, inst_degree)
    solution = fit_bridge_npiv(inst(zx, arm=a), phi(wx, arm=a), y, lambda_grid, seed)
    return OutcomeBridge(phi, _as_matrix(w).shape[1], solution)


def fit_treatment_bridge(z, w, a, x, degree=NPIV_DEFAULT_DEGREE + 2, lambda_grid=NPIV_LAMBDA_GRID, seed=None):
    """Treatment bridge: E[1{A=a} q(Z, a, X) | W, X] = 1 for each arm a."""
    a   = np.asarray(a, dtype=float)
    zx  = features(z, x)
    wx  = features(w, x)
    psi = PolynomialFeatures.fit(zx, degree)
    inst_degree = _instrument_degree(wx.shape[1], 1, psi.size)
    inst = PolynomialFeatures.fit(wx, inst_degree)
    phi  = inst(wx)
    solutions = tuple(
        fit_bridge_npiv(phi, (a == arm)[:, None]*psi(zx), np.ones(a.size), lambda_grid, seed)
        for arm in (0, 1))
    return TreatmentBridge(psi, _as_matrix(z).shape[1], solutions)


@dataclass(frozen=True, eq=False)
class BlockBridge:
    """Generic bridge b(v) = psi(v)^T coefficients on a single feature block."""
    psi      : PolynomialFeatures
    solution : BridgeSolution

    def __call__(self, f):
        return self.psi(f) @ self.solution.coefficients


def fit_shadow_bridge(x, w, y, degree=NPIV_DEFAULT_DEGREE, lambda_grid=NPIV_LAMBDA_GRID, seed=None):
    """Shadow bridge on complete cases: E[Y - eta(X, W) | X, Y] = 0."""
    xw  = features(x, w)
    xy  = features(x, y)
    psi = PolynomialFeatures.fit(xw, degree)
    inst = PolynomialFeatures.fit(xy, _instrument_degree(xy.shape[1], 1, psi.size))
    return BlockBridge(psi, fit_bridge_npiv(inst(xy), psi(xw), y, lambda_grid, seed))


@dataclass(frozen=True, eq=False)
class ExtendedPropensity:
    """e(x, y) = 1/max(u(x, y), 1) evaluated on features [x, y]."""
    inverse : BlockBridge
    clip    : tuple = (PROPENSITY_CLIP_LOW, 1.0)

    def __call__(self, f):
        u = self.inverse(_as_matrix(f))
        return np.clip(1/np.maximum(u, 1.0), *self.clip)


def fit_extended_propensity(x, w, r, ry, degree=NPIV_DEFAULT_DEGREE, lambda_grid=NPIV_LAMBDA_GRID, seed=None):
    """Extended propensity P(R=1 | X, Y) from the complete-case identity E[1/e(X,Y) | R=1, X, W] = 1/pi(X, W)."""
    r    = np.asarray(r)
    obs  = np.flatnonzero(r == 1)
    if obs.size == 0:
        raise FitError("Extended propensity needs complete cases")
    xw   = features(x, w)
    pi   = fit_propensity(xw, r)
    x, w = _as_matrix(x)[obs], _as_matrix(w)[obs]
    y    = np.asarray(ry, dtype=float)[obs]
    xy   = features(x, y)
    xw   = features(x, w)
    psi  = PolynomialFeatures.fit(xy, degree)
    inst = PolynomialFeatures.fit(xw, _instrument_degree(xw.shape[1], 1, psi.size))
    solution = fit_bridge_npiv(inst(xw), psi(xy), 1/pi(xw), lambda_grid, seed)
    return ExtendedPropensity(BlockBridge(psi, solution))

# Dose-Response ------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityRatio:
    """f(a)/f(a | l) evaluated on features [a, l], with a Gaussian working model for A | L."""
    marginal : object
    mean     : Regressor
    sd       : float

    def __call__(self, f):
        f = _as_matrix(f)
        a, l = f[:, 0], f[:, 1:]
        return self.marginal(a)/stats.norm.pdf(a, loc=self.mean(l), scale=self.sd)


def fit_density_ratio(a, l, method=REGRESSION_LS_SERIES, seed=None):
    a = np.asarray(a, dtype=float).ravel()
    l = _as_matrix(l)
    if np.unique(a).size < 2:
        raise DensityError("Treatment density needs at least two distinct doses")
    marginal = stats.gaussian_kde(a)
    mean     = fit_regression(l, a, method=method, family=BASIS_POLYNOMIAL, J_grid=range(1, 4), seed=seed)
    sd       = float(np.std(a - mean(l)))
    if not sd > 0:
        raise DensityError("Degenerate conditional treatment density")
    return DensityRatio(marginal, mean, sd)


@dataclass(frozen=True, eq=False)
class MarginalMean:
    """a -> mean_i mu(a, l_i) over the stored covariate sample."""
    mu : object
    l  : np.ndarray

    def __call__(self, a):
        a = np.asarray(a, dtype=float).ravel()
        m = self.l.shape[0]
        grid = features(np.repeat(a, m), np.tile(self.l, (a.size, 1)))
        return self.mu(grid).reshape(a.size, m).mean(axis=1)


def fit_marginal_mean(mu, l):
    return MarginalMean(mu, _as_matrix(l))

# Instrumental Variables ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IVNuisance:
    fz : object        # P(Z=1 | X).
    y1 : object        # E[Y | Z=1, X].
    y0 : object
    a1 : object        # E[A | Z=1, X].
    a0 : object

    def delta(self, x):
        return self.a1(x) - self.a0(x)

    def beta(self, x):
        """Working Wald ratio {E[Y|Z=1,X] - E[Y|Z=0,X]}/delta(X)."""
        delta = self.delta(x)
        if np.any(np.abs(delta) < WEAK_INSTRUMENT_THRESHOLD):
            raise WeakInstrumentError("Instrument strength below {}".format(WEAK_INSTRUMENT_THRESHOLD))
        return (self.y1(x) - self.y0(x))/delta


def fit_iv_nuisances(x, z, a, y, method=REGRESSION_FW_SERIES, seed=None):
    x = _as_matrix(x)
    z = np.asarray(z)
    fits = {}
    for arm in (0, 1):
        idx = np.flatnonzero(z == arm)
        fits["y{}".format(arm)] = fit_regression(x[idx], np.asarray(y)[idx], method=method, seed=seed)
        fits["a{}".format(arm)] = fit_regression(x[idx], np.asarray(a)[idx], method=method, seed=seed,
            clip=(0.0, 1.0))
    return IVNuisance(fz=fit_propensity(x, z), **fits)
