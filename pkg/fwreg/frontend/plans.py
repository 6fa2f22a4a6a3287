#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import logging
from dataclasses import dataclass

import numpy as np

from fwreg.common import *
from fwreg.frontend.nuisance import (features, fit_regression, fit_propensity, fit_shadow_bridge,
    fit_extended_propensity, fit_outcome_bridge, fit_treatment_bridge, fit_density_ratio,
    fit_marginal_mean, fit_iv_nuisances)
from fwreg.frontend.pseudo import NuisanceSet, RECORD_TYPES, pseudo_outcomes

logger = logging.getLogger(__name__)

# Pseudo Plan --------------------------------------------------------------------------------------

@dataclass(frozen=True)
class PseudoPlan:
    """Nuisance-fitting recipe plus pseudo-outcome constructor for one setting.

    ``propensity`` optionally replaces the fitted propensity: a callable ``records -> evaluator``.
    """
    setting       : str    = SETTING_FULLDATA
    link          : str    = LINK_IDENTITY
    method        : str    = REGRESSION_FW_SERIES
    k             : int    = KNN_DEFAULT_K
    lam           : float  = None
    bridge_degree : int    = NPIV_DEFAULT_DEGREE
    seed          : int    = None
    propensity    : object = None

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise RegistryError("Unknown setting {!r}".format(self.setting))
        if self.link not in LINKS:
            raise RegistryError("Unknown link {!r}".format(self.link))
        if self.link != LINK_IDENTITY and self.setting != SETTING_CATE:
            raise RegistryError("Link {} only applies to the CATE setting".format(self.link))
        if self.method not in REGRESSION_METHODS:
            raise RegistryError("Unknown regression method {!r}".format(self.method))

    @property
    def min_fit_size(self):
        return 1 if self.setting == SETTING_FULLDATA else PLAN_MIN_FIT_SIZE

    def _regress(self, x, y, clip=None):
        return fit_regression(x, y, method=self.method, k=self.k, lam=self.lam, seed=self.seed, clip=clip)

    def propensity_model(self, records, x, labels):
        if self.propensity is not None:
            return self.propensity(records)
        return fit_propensity(x, labels)

    def fit(self, records):
        """Fit the setting's nuisances on ``records``."""
        if not isinstance(records, RECORD_TYPES[self.setting]):
            raise SchemaError("Setting {} needs {} records".format(
                self.setting, RECORD_TYPES[self.setting].__name__))
        logger.debug("Fitting %s nuisances on %d records", self.setting, len(records))
        return getattr(self, "_fit_" + self.setting)(records)

    def pseudo(self, records, nuisances):
        return pseudo_outcomes(self.setting, records, nuisances, self.link)

    # Settings -------------------------------------------------------------------------------------

    def _fit_fulldata(self, rec):
        return NuisanceSet()

    def _fit_mar(self, rec):
        obs = rec.observed
        xz  = features(rec.x, rec.z)
        if obs.size == 0:
            raise FitError("MAR nuisances need observed responses")
        return NuisanceSet(
            pi = self.propensity_model(rec, xz, rec.r),
            mu = self._regress(xz[obs], rec.ry[obs]),
        )

    def _fit_shadow(self, rec):
        obs = rec.observed
        return NuisanceSet(
            pi  = (self.propensity(rec) if self.propensity is not None else
                   fit_extended_propensity(rec.x, rec.w, rec.r, rec.ry, self.bridge_degree, seed=self.seed)),
            eta = fit_shadow_bridge(rec.x[obs], rec.w[obs], rec.ry[obs], self.bridge_degree, seed=self.seed),
        )

    def _fit_cate(self, rec):
        nu = {}
        for arm in (0, 1):
            idx = np.flatnonzero(rec.a == arm)
            nu["mu{}".format(arm)] = self._regress(rec.x[idx], rec.y[idx],
                clip=(PROPENSITY_CLIP_LOW, PROPENSITY_CLIP_HIGH) if self.link == LINK_LOGIT else None)
        return NuisanceSet(pi=self.propensity_model(rec, rec.x, rec.a), **nu)

    def _fit_proximal(self, rec):
        return NuisanceSet(
            h_bridge = fit_outcome_bridge(rec.z, rec.w, rec.a, rec.x, rec.y, self.bridge_degree, seed=self.seed),
            q_bridge = fit_treatment_bridge(rec.z, rec.w, rec.a, rec.x, self.bridge_degree + 2, seed=self.seed),
        )

    def _fit_dose(self, rec):
        mu = self._regress(features(rec.a, rec.l), rec.y)
        return NuisanceSet(
            mu         = mu,
            dens_ratio = fit_density_ratio(rec.a, rec.l, seed=self.seed),
            marg_mu    = fit_marginal_mean(mu, rec.l),
        )

    def _fit_iv(self, rec):
        return NuisanceSet(iv=fit_iv_nuisances(rec.x, rec.z, rec.a, rec.y, method=self.method, seed=self.seed))


@dataclass(frozen=True)
class OraclePlan:
    """Plan whose nuisances are known: pseudo-outcomes evaluated at fixed evaluators."""
    setting   : str
    nuisances : NuisanceSet
    link      : str = LINK_IDENTITY

    min_fit_size = 1

    def fit(self, records):
        return self.nuisances

    def pseudo(self, records, nuisances):
        return pseudo_outcomes(self.setting, records, nuisances, self.link)
