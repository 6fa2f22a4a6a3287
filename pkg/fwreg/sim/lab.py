#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import time
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd
from scipy import stats

from fwreg.common import *
from fwreg.basis import BasisSpec
from fwreg.core import select_J_cv, split_fit
from fwreg.frontend.nuisance import fit_regression, corrupt_propensity
from fwreg.frontend.plans import PseudoPlan, OraclePlan
from fwreg.sim.dgp import DGPSpec, DGPS

logger = logging.getLogger(__name__)

# Experiment Config --------------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    dgp             : str   = DGP_KENNEDY
    estimators      : tuple = (ESTIMATOR_FW, ESTIMATOR_LS)
    n_grid          : tuple = (2000,)
    alpha_grid      : tuple = ()        # Propensity corruption rates, empty: fitted propensity.
    replications    : int   = 10
    K               : int   = CV_DEFAULT_REPEATS
    J_grid          : tuple = None      # None: default CV grid.
    basis           : str   = BASIS_BSPLINE
    nuisance_method : str   = None      # None: smoothing spline for CATE designs, FW series otherwise.
    smoothness      : float = 2.0
    test_size       : int   = TEST_SAMPLE_SIZE
    baseline        : str   = ESTIMATOR_FW
    seed            : int   = 0
    threads         : int   = 1

    def __post_init__(self):
        for name in ("estimators", "n_grid", "alpha_grid"):
            if not isinstance(getattr(self, name), (list, tuple)):
                raise ConfigError("{} must be a list, got {!r}".format(name, getattr(self, name)))
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.J_grid is not None:
            object.__setattr__(self, "J_grid", tuple(int(J) for J in self.J_grid))
        if self.dgp not in DGPS:
            raise RegistryError("Unknown data-generating process {!r}".format(self.dgp))
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise RegistryError("Unknown estimator {!r}".format(name))
        if self.basis not in BASIS_FAMILIES:
            raise RegistryError("Unknown basis family {!r}".format(self.basis))
        if not self.n_grid:
            raise GridError("Empty n grid")
        if any(isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1 for n in self.n_grid):
            raise GridError("n grid entries must be positive integers")
        if self.replications < 0 or self.threads < 1 or self.test_size < 1:
            raise ConfigError("replications >= 0, threads >= 1 and test_size >= 1 required")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        for alpha in self.alpha_grid:
            if not alpha > 0:
                raise GridError("alpha grid entries must be > 0")

    @classmethod
    def keys(cls):
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class ReplicationResult:
    estimator      : str
    n              : int
    alpha          : float
    replication    : int
    mse            : float
    J              : int
    seconds        : float
    squared_errors : np.ndarray = field(default=None, repr=False, compare=False)

# Estimators ---------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FitContext:
    records : object
    truth   : object
    config  : ExperimentConfig
    alpha   : float
    seed    : int

    @property
    def setting(self):
        return self.truth.setting

    @property
    def nuisance_method(self):
        if self.config.nuisance_method is not None:
            return self.config.nuisance_method
        if self.setting == SETTING_CATE:
            return REGRESSION_SMOOTHING_SPLINE
        return REGRESSION_FW_SERIES

    def plan(self):
        propensity = None
        if self.alpha is not None and self.setting in (SETTING_CATE, SETTING_MAR):
            pi, n, seed = self.truth.nuisances.pi, len(self.records), self.seed
            propensity  = lambda records: corrupt_propensity(pi, self.alpha, n, seed)
        return PseudoPlan(self.setting, method=self.nuisance_method, seed=self.seed, propensity=propensity)

    def spec(self, family=None):
        return BasisSpec(family=family or self.config.basis, dim=self.records.covariates.shape[1])


def _mode(selected):
    values, counts = np.unique(selected, return_counts=True)
    return int(values[np.argmax(counts)])


def _require(ctx, *settings):
    if ctx.setting not in settings:
        raise RegistryError("Estimator not applicable to the {} setting".format(ctx.setting))


def _series(estimator, family=None):
    def run(ctx):
        split = ctx.setting != SETTING_FULLDATA
        predictor = split_fit(ctx.records, ctx.plan(), ctx.spec(family), J_grid=ctx.config.J_grid,
            K=ctx.config.K, seed=ctx.seed, split=split, estimator=estimator)
        return predictor, _mode(predictor.selected)
    return run


def _oracle(ctx):
    plan   = OraclePlan(ctx.setting, ctx.truth.nuisances)
    pseudo = plan.pseudo(ctx.records, plan.fit(ctx.records))
    cv = select_J_cv(ctx.records.covariates, pseudo, ctx.spec(), J_grid=ctx.config.J_grid, K=ctx.config.K,
        seed=ctx.seed)
    return cv.predictor, _mode(cv.selected)


def _complete_case(ctx):
    _require(ctx, SETTING_MAR, SETTING_SHADOW)
    obs = ctx.records.observed
    cv  = select_J_cv(ctx.records.x[obs], ctx.records.ry[obs], ctx.spec(), J_grid=ctx.config.J_grid,
        K=ctx.config.K, seed=ctx.seed, estimator=ESTIMATOR_LS)
    return cv.predictor, _mode(cv.selected)


def _arm_regressions(ctx):
    rec = ctx.records
    out = []
    for arm in (0, 1):
        idx = np.flatnonzero(rec.a == arm)
        out.append(fit_regression(rec.x[idx], rec.y[idx], method=ctx.nuisance_method, seed=ctx.seed))
    return out


def _plugin(ctx):
    _require(ctx, SETTING_CATE)
    mu0, mu1 = _arm_regressions(ctx)
    return (lambda x: mu1(x) - mu0(x)), None


def _x_learner(ctx):
    """Impute individual effects with the opposite arm regression, regress, blend by propensity."""
    _require(ctx, SETTING_CATE)
    rec = ctx.records
    mu0, mu1 = _arm_regressions(ctx)
    pi = ctx.plan().propensity_model(rec, rec.x, rec.a)
    tau = []
    for arm, other in ((1, mu0), (0, mu1)):
        idx = np.flatnonzero(rec.a == arm)
        d   = rec.y[idx] - other(rec.x[idx]) if arm == 1 else other(rec.x[idx]) - rec.y[idx]
        tau.append(fit_regression(rec.x[idx], d, method=ctx.nuisance_method, seed=ctx.seed))
    tau1, tau0 = tau
    return (lambda x: pi(x)*tau0(x) + (1 - pi(x))*tau1(x)), None


ESTIMATORS = {
    ESTIMATOR_PLUGIN     : _plugin,
    ESTIMATOR_XL         : _x_learner,
    ESTIMATOR_DRL_STUB   : _series(ESTIMATOR_LS, BASIS_NATURAL_SPLINE),
    ESTIMATOR_ORACLE_DRL : _oracle,
    ESTIMATOR_FW         : _series(ESTIMATOR_FW),
    ESTIMATOR_LS         : _series(ESTIMATOR_LS),
    ESTIMATOR_CC_LS      : _complete_case,
}

# Replication Engine -------------------------------------------------------------------------------

def _replicate(config, k, n):
    """All estimators and alphas for replication ``k`` at sample size ``n``, on common random numbers."""
    data_seed, test_seed, fit_seed = np.random.SeedSequence([config.seed, k, n]).spawn(3)
    spec    = DGPSpec(config.dgp, n, extras={"smoothness": config.smoothness})
    process = spec.process
    records = process.sample(n, np.random.default_rng(data_seed))
    test_rng = np.random.default_rng(test_seed)
    test_x  = process.covariates(config.test_size, test_rng)
    truth   = process.target(test_x)
    seed    = int(fit_seed.generate_state(1)[0])
    out     = []
    for alpha in (config.alpha_grid or (None,)):
        for name in config.estimators:
            ctx   = FitContext(records, process, config, alpha, seed)
            start = time.perf_counter()
            predictor, J = ESTIMATORS[name](ctx)
            errors  = (predictor(test_x) - truth)**2
            seconds = time.perf_counter() - start
            out.append(ReplicationResult(
                estimator      = name,
                n              = n,
                alpha          = np.nan if alpha is None else float(alpha),
                replication    = k,
                mse            = float(np.mean(errors)),
                J              = J,
                seconds        = seconds,
                squared_errors = errors,
            ))
    logger.debug("Replication %d at n=%d done", k, n)
    return out


def run_replications(config):
    """Run every (n, replication) task of ``config``; output order is independent of ``threads``."""
    tasks = [(k, n) for n in config.n_grid for k in range(config.replications)]
    logger.info("Running %d replications of %s (%d threads)", len(tasks), config.dgp, config.threads)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            chunks = list(pool.map(lambda task: _replicate(config, *task), tasks))
    else:
        chunks = [_replicate(config, k, n) for k, n in tasks]
    return [result for chunk in chunks for result in chunk]


RESULT_COLUMNS = ["estimator", "n", "alpha", "replication", "mse", "J", "seconds"]


def results_frame(results):
    rows = [{key: getattr(r, key) for key in RESULT_COLUMNS} for r in results]
    frame = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    frame["J"] = frame["J"].astype("Int64")
    return frame


def mse_ratios(frame, baseline=ESTIMATOR_FW):
    """Per grid point mean MSE of every estimator divided by the baseline's."""
    keys  = ["n", "alpha"]
    means = frame.groupby(["estimator"] + keys, dropna=False)["mse"].mean().reset_index()
    base  = means[means["estimator"] == baseline][keys + ["mse"]].rename(columns={"mse": "baseline_mse"})
    if base.empty:
        raise RegistryError("Baseline estimator {!r} not in results".format(baseline))
    out   = means.merge(base, on=keys, how="left")
    out["ratio"] = out["mse"]/out["baseline_mse"]
    return out[["estimator", "n", "alpha", "mse", "baseline_mse", "ratio"]]

# Rates --------------------------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope     : float
    se        : float
    intercept : float


def rate_slope(frame):
    """OLS slope of log2(mean MSE) on log2(n) over replication-averaged points."""
    if not isinstance(frame, pd.DataFrame):
        frame = results_frame(frame)
    counts = frame.groupby("n")["mse"].count()
    if counts.size < RATE_MIN_GRID:
        raise GridError("Rate fit needs {} distinct n, got {}".format(RATE_MIN_GRID, counts.size))
    if counts.min() < RATE_MIN_REPLICATIONS:
        raise GridError("Rate fit needs {} replications per n, got {}".format(
            RATE_MIN_REPLICATIONS, int(counts.min())))
    means = frame.groupby("n")["mse"].mean()
    fit   = stats.linregress(np.log2(means.index.to_numpy(dtype=float)), np.log2(means.to_numpy()))
    return SlopeFit(float(fit.slope), float(fit.stderr), float(fit.intercept))


def rate_slopes(frame):
    """Slope per (estimator, alpha) group."""
    rows = []
    for (name, alpha), group in frame.groupby(["estimator", "alpha"], dropna=False, sort=True):
        fit = rate_slope(group)
        rows.append({"estimator": name, "alpha": alpha, "slope": fit.slope, "se": fit.se})
    return pd.DataFrame(rows, columns=["estimator", "alpha", "slope", "se"])
