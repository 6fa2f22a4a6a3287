#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import io
import os
import json
import tempfile
import unittest
import contextlib
from unittest import mock

import numpy as np
import pandas as pd

from fwreg.common import *
from fwreg.cli import main
from fwreg.sim.dgp import dgp_mar


def run(*argv):
    with contextlib.redirect_stdout(io.StringIO()):
        return main(list(argv))


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


class CLITestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp  = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp, name)

    def write_text(self, name, text):
        with open(self.path(name), "w") as f:
            f.write(text)
        return self.path(name)

    def write_json(self, name, values):
        return self.write_text(name, json.dumps(values))

    def write_frame(self, name, frame):
        frame.to_csv(self.path(name), index=False)
        return self.path(name)

    def fulldata(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        x   = rng.uniform(-1, 1, n)
        return pd.DataFrame({"x": x, "y": np.sin(np.pi*x) + 0.3*rng.normal(size=n)})


class TestFit(CLITestCase):
    def test_fulldata(self):
        data = self.write_frame("data.csv", self.fulldata())
        out  = self.path("pred.csv")
        self.assertEqual(run("fit", data, "--setting", SETTING_FULLDATA, "--out", out), EXIT_OK)
        pred = pd.read_csv(out)
        self.assertEqual(list(pred.columns), ["x", "estimate", "variance", "ci_lower", "ci_upper"])
        self.assertEqual(len(pred), 200)
        self.assertTrue(np.all(pred["variance"] >= 0))
        self.assertTrue(np.all(pred["ci_lower"] <= pred["estimate"]))
        self.assertTrue(np.all(pred["estimate"] <= pred["ci_upper"]))
        first = read_bytes(out)
        self.assertEqual(run("fit", data, "--setting", SETTING_FULLDATA, "--out", out), EXIT_OK)
        self.assertEqual(read_bytes(out), first)

    def test_constant_response(self):
        frame = self.fulldata().assign(y=2.0)
        data  = self.write_frame("data.csv", frame)
        out   = self.path("pred.csv")
        self.assertEqual(run("fit", data, "--out", out), EXIT_OK)
        pred = pd.read_csv(out)
        # Shrinkage only pulls the constant towards zero.
        self.assertTrue(np.all((pred["estimate"] > 0) & (pred["estimate"] <= 2.0 + 1e-9)))
        self.assertTrue(np.all(pred["ci_lower"] <= pred["estimate"]))
        self.assertTrue(np.all(pred["estimate"] <= pred["ci_upper"]))

    def test_eval_points(self):
        data   = self.write_frame("data.csv", self.fulldata())
        points = self.write_text("eval.csv", "x\n-0.5\n0\n0.5\n")
        out    = self.path("pred.csv")
        self.assertEqual(run("fit", data, "--eval", points, "--out", out), EXIT_OK)
        pred = pd.read_csv(out)
        np.testing.assert_array_equal(pred["x"], [-0.5, 0.0, 0.5])
        self.assertTrue(np.all(np.isfinite(pred["estimate"])))

    def test_eval_missing_column(self):
        data   = self.write_frame("data.csv", self.fulldata())
        points = self.write_text("eval.csv", "u\n0\n")
        self.assertEqual(run("fit", data, "--eval", points, "--out", self.path("pred.csv")), EXIT_CONFIG)

    def mar_frame(self):
        rec = dgp_mar(300, seed=1).records
        return pd.DataFrame({"x": rec.x[:, 0], "z": rec.z, "r": rec.r, "y": rec.ry})

    def test_mar_missing_outcomes(self):
        data = self.write_frame("mar.csv", self.mar_frame())
        out  = self.path("pred.csv")
        self.assertEqual(run("fit", data, "--setting", SETTING_MAR, "--out", out), EXIT_OK)
        self.assertTrue(np.all(np.isfinite(pd.read_csv(out)["estimate"])))

    def test_mar_missing_observed_outcome(self):
        frame = self.mar_frame()
        frame.loc[np.flatnonzero(frame["r"] == 1)[0], "y"] = np.nan
        data  = self.write_frame("mar.csv", frame)
        self.assertEqual(run("fit", data, "--setting", SETTING_MAR, "--out", self.path("pred.csv")),
            EXIT_CONFIG)

    def test_missing_column(self):
        data = self.write_frame("data.csv", self.fulldata().drop(columns="y"))
        self.assertEqual(run("fit", data, "--out", self.path("pred.csv")), EXIT_CONFIG)

    def test_non_numeric(self):
        frame = self.fulldata().astype(str)
        frame.loc[3, "x"] = "abc"
        data  = self.write_frame("data.csv", frame)
        self.assertEqual(run("fit", data, "--out", self.path("pred.csv")), EXIT_CONFIG)

    def test_non_finite(self):
        for value in ("inf", "-inf", "Infinity"):
            frame = self.fulldata().astype(str)
            frame.loc[3, "x"] = value
            data  = self.write_frame("data.csv", frame)
            out   = self.path("pred.csv")
            self.assertEqual(run("fit", data, "--out", out), EXIT_CONFIG, msg=value)
            self.assertFalse(os.path.exists(out))

    def test_constant_covariate(self):
        data = self.write_frame("data.csv", self.fulldata().assign(x=0.5))
        out  = self.path("pred.csv")
        self.assertEqual(run("fit", data, "--basis", BASIS_BSPLINE, "--out", out), EXIT_NUMERICAL)
        self.assertFalse(os.path.exists(out))

    def test_summary(self):
        data   = self.write_frame("mar.csv", self.mar_frame())
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            code = main(["fit", data, "--setting", SETTING_MAR, "--out", self.path("pred.csv")])
        self.assertEqual(code, EXIT_OK)
        text = stdout.getvalue()
        self.assertIn("split:       150 nuisance / 150 estimation", text)
        self.assertIn("nuisances:   pi, mu", text)
        self.assertIn("selected J:", text)
        self.assertIn("pseudo:      mean", text)

    def test_column_roles(self):
        frame  = self.fulldata().rename(columns={"x": "age", "y": "income"})
        data   = self.write_frame("data.csv", frame)
        config = self.write_json("fit.json", {"columns": {"covariates": "age", "outcome": "income"}})
        out    = self.path("pred.csv")
        self.assertEqual(run("fit", data, "--config", config, "--out", out), EXIT_OK)
        self.assertEqual(list(pd.read_csv(out).columns)[0], "age")

    def test_config_errors(self):
        data = self.write_frame("data.csv", self.fulldata())
        out  = self.path("pred.csv")
        for name, text in [
            ("unknown.json", json.dumps({"bogus": 1})),
            ("roles.json",   json.dumps({"columns": {"label": "y"}})),
            ("invalid.json", "{not json"),
            ("list.json",    "[1, 2]"),
            ("folds.json",   json.dumps({"K": 0})),
            ("repeats.json", json.dumps({"repeats": 0})),
            ("split.json",   json.dumps({"split_fraction": 1.0})),
            ("grid.json",    json.dumps({"J_grid": "123"})),
            ("seed.json",    json.dumps({"seed": "0"})),
        ]:
            config = self.write_text(name, text)
            self.assertEqual(run("fit", data, "--config", config, "--out", out), EXIT_CONFIG, msg=name)

    def test_missing_dataset(self):
        self.assertEqual(run("fit", self.path("absent.csv"), "--out", self.path("pred.csv")), EXIT_IO)


class TestSimulate(CLITestCase):
    def config(self, **extra):
        return self.write_json("sim.json", {
            "dgp"          : DGP_SMOOTH,
            "estimators"   : [ESTIMATOR_FW, ESTIMATOR_LS],
            "n_grid"       : [100],
            "replications" : 2,
            "J_grid"       : [1, 2, 3, 4],
            "K"            : 2,
            "test_size"    : 50,
            **extra,
        })

    def simulate(self, out, *extra):
        return run("simulate", "--config", self.config(), "--out", out, *extra)

    def test_outputs(self):
        out = self.path("a")
        self.assertEqual(self.simulate(out), EXIT_OK)
        results = pd.read_csv(os.path.join(out, "results.csv"))
        self.assertEqual(len(results), 4)
        self.assertTrue(np.all(results["seconds"] == 0))
        ratios = pd.read_csv(os.path.join(out, "ratios.csv"))
        np.testing.assert_allclose(ratios.loc[ratios["estimator"] == ESTIMATOR_FW, "ratio"], 1.0)

    def test_reproducible(self):
        a, b, c = self.path("a"), self.path("b"), self.path("c")
        self.assertEqual(self.simulate(a), EXIT_OK)
        self.assertEqual(self.simulate(b), EXIT_OK)
        self.assertEqual(self.simulate(c, "--threads", "2"), EXIT_OK)
        for name in ("results.csv", "ratios.csv"):
            first = read_bytes(os.path.join(a, name))
            self.assertEqual(read_bytes(os.path.join(b, name)), first)
            self.assertEqual(read_bytes(os.path.join(c, name)), first)

    def test_overrides(self):
        out = self.path("a")
        self.assertEqual(self.simulate(out, "--replications", "1", "--estimators", ESTIMATOR_FW), EXIT_OK)
        results = pd.read_csv(os.path.join(out, "results.csv"))
        self.assertEqual(list(results["estimator"]), [ESTIMATOR_FW])

    def test_bad_thread_env(self):
        with mock.patch.dict(os.environ, {"FWREG_THREADS": "many"}):
            self.assertEqual(self.simulate(self.path("a")), EXIT_CONFIG)

    def test_unknown_estimator(self):
        self.assertEqual(self.simulate(self.path("a"), "--estimators", "bogus"), EXIT_CONFIG)

    def test_timing_opt_in(self):
        out    = self.path("a")
        config = self.config(timing=True)
        self.assertEqual(run("simulate", "--config", config, "--out", out), EXIT_OK)
        results = pd.read_csv(os.path.join(out, "results.csv"))
        self.assertTrue(np.all(results["seconds"] >= 0))
        self.assertTrue(np.any(results["seconds"] > 0))

    def test_invalid_values(self):
        for extra in ({"K": 0}, {"n_grid": "2000"}, {"n_grid": [0]}, {"replications": "2"},
                      {"estimators": ESTIMATOR_FW}, {"K": 1.5}):
            config = self.config(**extra)
            self.assertEqual(run("simulate", "--config", config, "--out", self.path("a")), EXIT_CONFIG,
                msg=extra)


class TestRates(CLITestCase):
    def results(self, n_grid):
        rows = [{"estimator": ESTIMATOR_FW, "n": n, "alpha": np.nan, "replication": k, "mse": 2.0/n}
            for n in n_grid for k in range(RATE_MIN_REPLICATIONS)]
        return self.write_frame("results.csv", pd.DataFrame(rows))

    def test_slope(self):
        out = self.path("rates.csv")
        self.assertEqual(run("rates", "--results", self.results((100, 200, 400)), "--out", out), EXIT_OK)
        rates = pd.read_csv(out)
        self.assertEqual(len(rates), 1)
        self.assertAlmostEqual(rates["slope"][0], -1.0, places=8)

    def test_short_grid(self):
        out = self.path("rates.csv")
        self.assertEqual(run("rates", "--results", self.results((100, 200)), "--out", out), EXIT_CONFIG)
        self.assertFalse(os.path.exists(out))

    def test_results_columns(self):
        data = self.write_text("results.csv", "estimator,n\nfw,100\n")
        self.assertEqual(run("rates", "--results", data, "--out", self.path("rates.csv")), EXIT_CONFIG)


if __name__ == "__main__":
    unittest.main()
