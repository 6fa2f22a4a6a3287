#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import unittest
import warnings

import numpy as np
from scipy import linalg

from fwreg.common import *
from fwreg.frontend.nuisance import *
from fwreg.sim.dgp import ProximalLinear


class TestRegression(unittest.TestCase):
    def setUp(self):
        rng    = np.random.default_rng(0)
        self.x = rng.uniform(-1, 1, 300)
        self.y = np.sin(3*self.x) + 0.1*rng.normal(size=300)

    def test_knn_interpolates(self):
        reg = fit_regression(self.x, self.y, method=REGRESSION_KNN, k=1)
        np.testing.assert_allclose(reg(self.x[:20]), self.y[:20])

    def test_knn_constant(self):
        reg = fit_regression(self.x, np.full(300, 2.5), method=REGRESSION_KNN)
        np.testing.assert_allclose(reg(np.linspace(-2, 2, 5)), 2.5)

    def test_knn_too_few_samples(self):
        with self.assertRaises(FitError):
            fit_regression(self.x[:3], self.y[:3], method=REGRESSION_KNN, k=5)

    def test_ls_series_linear(self):
        reg = fit_regression(self.x, 1 + 2*self.x, method=REGRESSION_LS_SERIES, seed=0)
        np.testing.assert_allclose(reg(np.linspace(-1, 1, 9)), 1 + 2*np.linspace(-1, 1, 9), atol=1e-8)

    def test_fw_series_constant(self):
        reg  = fit_regression(self.x, np.full(300, 3.0), method=REGRESSION_FW_SERIES, seed=0)
        pred = reg(np.linspace(-1, 1, 9))
        self.assertTrue(np.all(pred <= 3.0))
        np.testing.assert_allclose(pred, 3.0, rtol=0.1)

    def test_fw_series_tracks_signal(self):
        reg  = fit_regression(self.x, self.y, method=REGRESSION_FW_SERIES, seed=0)
        grid = np.linspace(-0.9, 0.9, 19)
        self.assertLess(np.max(np.abs(reg(grid) - np.sin(3*grid))), 0.2)

    def test_smoothing_spline_linear(self):
        reg  = fit_regression(self.x, 1 - self.x, method=REGRESSION_SMOOTHING_SPLINE)
        grid = np.linspace(-0.9, 0.9, 7)
        np.testing.assert_allclose(reg(grid), 1 - grid, atol=1e-6)

    def test_smoothing_spline_duplicates(self):
        x = np.repeat(np.linspace(0, 1, 10), 3)
        reg = fit_regression(x, 2*x, method=REGRESSION_SMOOTHING_SPLINE, lam=1.0)
        np.testing.assert_allclose(reg(np.array([0.5])), [1.0], atol=1e-6)

    def test_smoothing_spline_errors(self):
        with self.assertRaises(FitError):
            fit_regression(np.column_stack([self.x, self.x]), self.y, method=REGRESSION_SMOOTHING_SPLINE)
        with self.assertRaises(FitError):
            fit_regression(np.arange(4.0), np.arange(4.0), method=REGRESSION_SMOOTHING_SPLINE)

    def test_clip(self):
        reg = fit_regression(self.x, 5*self.x, method=REGRESSION_KNN, clip=(0.0, 1.0))
        out = reg(self.x)
        self.assertTrue(np.all((out >= 0) & (out <= 1)))

    def test_errors(self):
        with self.assertRaises(RegistryError):
            fit_regression(self.x, self.y, method="forest")
        with self.assertRaises(ShapeError):
            fit_regression(self.x, self.y[:10])
        reg = fit_regression(self.x, self.y, method=REGRESSION_KNN)
        with self.assertRaises(ShapeError):
            reg(np.zeros((3, 2)))

    def test_features(self):
        f = features(np.ones(3), np.zeros((3, 2)))
        self.assertEqual(f.shape, (3, 3))


class TestPropensity(unittest.TestCase):
    def test_balanced(self):
        rng    = np.random.default_rng(1)
        x      = rng.uniform(-1, 1, 4000)
        labels = (rng.random(4000) < 0.5).astype(float)
        model  = fit_propensity(x, labels)
        self.assertTrue(model.converged)
        np.testing.assert_allclose(model(np.linspace(-1, 1, 5)), 0.5, atol=0.05)

    def test_logistic_recovery(self):
        rng    = np.random.default_rng(2)
        x      = rng.uniform(-1, 1, 20000)
        labels = (rng.random(20000) < 1/(1 + np.exp(-(0.3 + x)))).astype(float)
        model  = fit_propensity(x, labels)
        np.testing.assert_allclose(model.coefficients, [0.3, 1.0], atol=0.1)

    def test_separation_clipped(self):
        x = np.concatenate([np.linspace(-1, -0.1, 20), np.linspace(0.1, 1, 20)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit_propensity(x, (x > 0).astype(float))
        out = model(x)
        self.assertTrue(np.all((out >= PROPENSITY_CLIP_LOW) & (out <= PROPENSITY_CLIP_HIGH)))
        self.assertAlmostEqual(model(np.array([1.0]))[0], PROPENSITY_CLIP_HIGH)
        self.assertAlmostEqual(model(np.array([-1.0]))[0], PROPENSITY_CLIP_LOW)

    def test_single_class(self):
        with self.assertRaises(SeparationError):
            fit_propensity(np.arange(5.0), np.ones(5))

    def test_non_binary(self):
        with self.assertRaises(FitError):
            fit_propensity(np.arange(5.0), np.arange(5.0))

    def test_corruption(self):
        pi = lambda x: np.full(np.asarray(x).shape[0], 0.3)
        a  = corrupt_propensity(pi, 0.25, 100, seed=7)
        b  = corrupt_propensity(pi, 0.25, 100, seed=7)
        np.testing.assert_array_equal(a(np.zeros(4)), b(np.zeros(4)))
        near = corrupt_propensity(pi, 50.0, 100, seed=7)
        np.testing.assert_allclose(near(np.zeros(4)), 0.3, atol=1e-12)
        far = corrupt_propensity(lambda x: np.full(np.asarray(x).shape[0], 0.999), 0.01, 2, seed=0)
        self.assertLessEqual(far(np.zeros(1))[0], PROPENSITY_CLIP_HIGH)
        with self.assertRaises(ValueError):
            corrupt_propensity(pi, 0.0, 100)


class TestBridge(unittest.TestCase):
    def setUp(self):
        rng    = np.random.default_rng(3)
        self.x = np.column_stack([np.ones(200), rng.normal(size=(200, 2))])
        self.t = self.x @ [1.0, -2.0, 0.5] + 0.1*rng.normal(size=200)

    def test_self_instrumented_is_ols(self):
        sol = fit_bridge_npiv(self.x, self.x, self.t, lambda_grid=(0.0,))
        ols = np.linalg.lstsq(self.x, self.t, rcond=None)[0]
        np.testing.assert_allclose(sol.coefficients, ols, rtol=1e-8)
        self.assertEqual(sol.M, 3)
        self.assertEqual(sol.J, 3)

    def test_heavy_ridge_vanishes(self):
        sol = fit_bridge_npiv(self.x, self.x, self.t, lambda_grid=(1e12,))
        self.assertLess(np.linalg.norm(sol.coefficients), 1e-6)

    def test_objective(self):
        sol = fit_bridge_npiv(self.x, self.x, self.t, lambda_grid=(1e-2,))
        q   = linalg.orth(self.x)
        res = np.sum((q.T @ (self.t - self.x @ sol.coefficients))**2)
        self.assertAlmostEqual(sol.objective, res + sol.lam*sol.coefficients @ sol.coefficients, places=8)
        self.assertAlmostEqual(sol.residual_norm, np.sqrt(res), places=8)

    def test_just_identified_noiseless(self):
        rng  = np.random.default_rng(4)
        inst = rng.normal(size=(100, 3))
        endo = inst @ rng.normal(size=(3, 3)) + 0.1*rng.normal(size=(100, 3))
        b    = np.array([0.5, -1.0, 2.0])
        sol  = fit_bridge_npiv(inst, endo, endo @ b, lambda_grid=(0.0,))
        np.testing.assert_allclose(sol.coefficients, b, atol=1e-8)
        self.assertLess(sol.residual_norm, 1e-8)

    def test_under_identified(self):
        with self.assertRaises(UnderIdentifiedError):
            fit_bridge_npiv(self.x[:, :2], self.x, self.t)
        dup = np.column_stack([self.x[:, :2], self.x[:, 1]])
        with self.assertRaises(UnderIdentifiedError):
            fit_bridge_npiv(dup, self.x, self.t, lambda_grid=(0.0,))

    def test_cross_validated_grid(self):
        sol = fit_bridge_npiv(self.x, self.x, self.t, seed=0)
        self.assertGreaterEqual(sol.lam, 0.0)
        np.testing.assert_allclose(sol.coefficients, [1.0, -2.0, 0.5], atol=0.1)

    def test_polynomial_features(self):
        x   = np.column_stack([np.arange(5.0), np.arange(5.0)**2])
        phi = PolynomialFeatures.fit(x, 2)
        self.assertEqual(phi.size, 5)
        self.assertEqual(phi(x).shape, (5, 5))
        arm = np.array([0, 1, 0, 1, 1])
        out = phi(x, arm=arm)
        self.assertEqual(out.shape, (5, 10))
        np.testing.assert_array_equal(out[arm == 1, :5], 0.0)


class TestProximalBridges(unittest.TestCase):
    def setUp(self):
        self.dgp = ProximalLinear()
        self.rec = self.dgp.sample(3000, np.random.default_rng(5))

    def test_outcome_bridge_noiseless(self):
        rec = self.rec
        y   = self.dgp.h_bridge(features(rec.w, rec.a, rec.x))
        h   = fit_outcome_bridge(rec.z, rec.w, rec.a, rec.x, y, seed=0)
        f   = features(rec.w, rec.a, rec.x)
        np.testing.assert_allclose(h(f), self.dgp.h_bridge(f), atol=1e-6)

    def test_outcome_bridge_noisy(self):
        rec = self.rec
        h   = fit_outcome_bridge(rec.z, rec.w, rec.a, rec.x, rec.y, seed=0)
        f   = features(rec.w, rec.a, rec.x)
        self.assertLess(np.mean(np.abs(h(f) - self.dgp.h_bridge(f))), 0.15)

    def test_treatment_bridge_positive_mean(self):
        rec = self.rec
        q   = fit_treatment_bridge(rec.z, rec.w, rec.a, rec.x, lambda_grid=(0.0,), seed=0)
        f   = features(rec.z, rec.a, rec.x)
        # E[1{A=a} q(Z, a, X)] = 1 for each arm.
        for arm in (0, 1):
            ones = np.full(len(rec), float(arm))
            value = np.mean((rec.a == arm)*q(features(rec.z, ones, rec.x)))
            self.assertAlmostEqual(value, 1.0, delta=0.1)
        self.assertEqual(q(f).shape, (len(rec),))


class TestShadowBridges(unittest.TestCase):
    def test_extended_propensity_mcar(self):
        rng = np.random.default_rng(6)
        x, w = rng.normal(size=4000), rng.normal(size=4000)
        y    = w + rng.normal(size=4000)
        r    = (rng.random(4000) < 0.6).astype(float)
        e    = fit_extended_propensity(x, w, r, np.where(r == 1, y, np.nan), seed=0)
        grid = features(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5))
        np.testing.assert_allclose(e(grid), 0.6, atol=0.05)

    def test_extended_propensity_needs_cases(self):
        with self.assertRaises(FitError):
            fit_extended_propensity(np.zeros(5), np.zeros(5), np.zeros(5), np.full(5, np.nan))

    def test_shadow_bridge_identity(self):
        rng = np.random.default_rng(7)
        x   = rng.normal(size=2000)
        y   = x + rng.normal(size=2000)
        w   = y + 0.5*rng.normal(size=2000)
        eta = fit_shadow_bridge(x, w, y, seed=0)
        f   = features(np.zeros(3), np.array([-1.0, 0.0, 1.0]))
        np.testing.assert_allclose(eta(f), [-1.0, 0.0, 1.0], atol=0.15)


class TestDoseNuisances(unittest.TestCase):
    def test_density_ratio(self):
        rng   = np.random.default_rng(8)
        l     = rng.normal(size=2000)
        a     = 0.5*l + rng.normal(size=2000)
        ratio = fit_density_ratio(a, l, seed=0)
        out   = ratio(features(a[:50], l[:50]))
        self.assertTrue(np.all(out > 0) and np.all(np.isfinite(out)))

    def test_density_ratio_degenerate(self):
        with self.assertRaises(DensityError):
            fit_density_ratio(np.ones(10), np.arange(10.0))

    def test_marginal_mean(self):
        mu   = lambda f: f[:, 0] + f[:, 1]
        mean = fit_marginal_mean(mu, np.array([1.0, 3.0]))
        np.testing.assert_allclose(mean(np.array([0.0, 1.0])), [2.0, 3.0])


class TestIVNuisances(unittest.TestCase):
    def test_weak_instrument(self):
        rng = np.random.default_rng(9)
        x   = rng.uniform(-1, 1, 400)
        z   = (rng.random(400) < 0.5).astype(float)
        a   = (rng.random(400) < 0.5).astype(float)
        nu  = fit_iv_nuisances(x, z, a, rng.normal(size=400), method=REGRESSION_KNN)
        with self.assertRaises(WeakInstrumentError):
            nu.beta(x)

    def test_strong_instrument(self):
        rng = np.random.default_rng(10)
        x   = rng.uniform(-1, 1, 400)
        z   = (rng.random(400) < 0.5).astype(float)
        nu  = fit_iv_nuisances(x, z, z, 2*z, method=REGRESSION_LS_SERIES, seed=0)
        np.testing.assert_allclose(nu.delta(x), 1.0, atol=1e-6)
        np.testing.assert_allclose(nu.beta(x), 2.0, atol=1e-6)


if __name__ == "__main__":
    unittest.main()
