#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import unittest

import numpy as np

from fwreg.common import *
from fwreg.basis import BasisSpec
from fwreg.core import crossfit, split_fit
from fwreg.frontend.pseudo import CATE, FullData, NuisanceSet
from fwreg.frontend.plans import PseudoPlan, OraclePlan
from fwreg.sim.dgp import dgp_mar, dgp_shadow, dgp_proximal_linear, dgp_dose_response, dgp_iv, dgp_kennedy


class TestPlanRegistry(unittest.TestCase):
    def test_unknown_names(self):
        with self.assertRaises(RegistryError):
            PseudoPlan("bogus")
        with self.assertRaises(RegistryError):
            PseudoPlan(SETTING_CATE, link="probit")
        with self.assertRaises(RegistryError):
            PseudoPlan(SETTING_MAR, method="forest")

    def test_link_needs_cate(self):
        with self.assertRaises(RegistryError):
            PseudoPlan(SETTING_MAR, link=LINK_LOGIT)

    def test_min_fit_size(self):
        self.assertEqual(PseudoPlan().min_fit_size, 1)
        self.assertEqual(PseudoPlan(SETTING_IV).min_fit_size, PLAN_MIN_FIT_SIZE)
        self.assertEqual(OraclePlan(SETTING_CATE, NuisanceSet()).min_fit_size, 1)

    def test_record_type(self):
        with self.assertRaises(SchemaError):
            PseudoPlan(SETTING_CATE).fit(FullData(x=[0.0], y=[1.0]))


class TestPlanFits(unittest.TestCase):
    def test_mar(self):
        rec    = dgp_mar(400, seed=0).records
        plan   = PseudoPlan(SETTING_MAR, seed=0)
        pseudo = plan.pseudo(rec, plan.fit(rec))
        self.assertEqual(pseudo.shape, (400,))
        self.assertTrue(np.all(np.isfinite(pseudo)))

    def test_external_propensity(self):
        sim  = dgp_mar(200, seed=1)
        pi   = sim.truth.pi
        plan = PseudoPlan(SETTING_MAR, method=REGRESSION_KNN, propensity=lambda rec: pi)
        self.assertIs(plan.fit(sim.records).pi, pi)

    def test_shadow(self):
        rec    = dgp_shadow(600, seed=2).records
        plan   = PseudoPlan(SETTING_SHADOW, seed=0)
        pseudo = plan.pseudo(rec, plan.fit(rec))
        self.assertTrue(np.all(np.isfinite(pseudo)))

    def test_cate_logit(self):
        rng  = np.random.default_rng(3)
        x    = rng.uniform(-1, 1, 400)
        a    = (rng.random(400) < 0.5).astype(float)
        y    = (rng.random(400) < 0.3 + 0.4*(x > 0)).astype(float)
        rec  = CATE(x=x, a=a, y=y)
        plan = PseudoPlan(SETTING_CATE, link=LINK_LOGIT, method=REGRESSION_KNN)
        nu   = plan.fit(rec)
        for mu in (nu.mu0, nu.mu1):
            out = mu(rec.x)
            self.assertTrue(np.all((out >= PROPENSITY_CLIP_LOW) & (out <= PROPENSITY_CLIP_HIGH)))
        self.assertTrue(np.all(np.isfinite(plan.pseudo(rec, nu))))

    def test_dose(self):
        rec  = dgp_dose_response(600, seed=4).records
        pred = split_fit(rec, PseudoPlan(SETTING_DOSE, seed=0), BasisSpec(), J=3, seed=0)
        self.assertTrue(np.all(np.isfinite(pred(np.linspace(-1, 1, 5)))))

    def test_iv(self):
        rec  = dgp_iv(800, seed=5).records
        pred = split_fit(rec, PseudoPlan(SETTING_IV, seed=0), BasisSpec(), J=2, seed=0)
        self.assertTrue(np.all(np.isfinite(pred(np.linspace(-1, 1, 5)))))


class TestPlanEstimates(unittest.TestCase):
    def test_proximal_effect(self):
        rec  = dgp_proximal_linear(2000, seed=6).records
        pred = crossfit(rec, PseudoPlan(SETTING_PROXIMAL, seed=0), BasisSpec(), J=1, seed=0)
        self.assertLess(abs(np.mean(pred(np.linspace(-1, 1, 5))) - 1.0), 0.5)

    def test_oracle_kennedy_null(self):
        sim  = dgp_kennedy(2000, seed=7)
        plan = OraclePlan(SETTING_CATE, sim.truth.nuisances)
        pred = crossfit(sim.records, plan, BasisSpec(), J=1, seed=0)
        self.assertLess(abs(pred(np.array([0.0]))[0]), 0.5)


if __name__ == "__main__":
    unittest.main()
