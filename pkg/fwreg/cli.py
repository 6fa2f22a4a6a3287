#!/usr/bin/env python3

#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import os
import re
import sys
import json
import logging
import argparse
import tempfile
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from fwreg.common import *
from fwreg.basis import BasisSpec
from fwreg.core import split_fit
from fwreg.frontend.plans import PseudoPlan
from fwreg.frontend.pseudo import FullData, MAR, Shadow, CATE, Proximal, DoseResponse, IV
from fwreg.sim.lab import ExperimentConfig, run_replications, results_frame, mse_ratios, rate_slopes

logger = logging.getLogger(__name__)

# Dataset Schema -----------------------------------------------------------------------------------

ROLES = ("covariates", "outcome", "response", "treatment", "z", "w")

REQUIRED_ROLES = {
    SETTING_FULLDATA : ("covariates", "outcome"),
    SETTING_MAR      : ("covariates", "z", "response", "outcome"),
    SETTING_SHADOW   : ("covariates", "w", "response", "outcome"),
    SETTING_CATE     : ("covariates", "treatment", "outcome"),
    SETTING_PROXIMAL : ("covariates", "z", "w", "treatment", "outcome"),
    SETTING_DOSE     : ("covariates", "treatment", "outcome"),
    SETTING_IV       : ("covariates", "z", "treatment", "outcome"),
}


@dataclass(frozen=True)
class DatasetSchema:
    """Column-role map of an ingested CSV. ``covariates`` are the L columns in the dose setting."""
    covariates : tuple = None        # None: every column named x, x1, x2, ...
    outcome    : str   = "y"
    response   : str   = "r"
    treatment  : str   = "a"
    z          : str   = "z"
    w          : str   = "w"

    @classmethod
    def from_config(cls, columns):
        columns = dict(columns or {})
        unknown = set(columns) - set(ROLES)
        if unknown:
            raise ConfigError("Unknown column roles: {}".format(", ".join(sorted(unknown))))
        if "covariates" in columns:
            cov = columns["covariates"]
            columns["covariates"] = (cov,) if isinstance(cov, str) else tuple(cov)
        return cls(**columns)

    def resolve(self, setting, header):
        """Concrete role -> column names for ``setting``, checked against the CSV ``header``."""
        covariates = self.covariates
        if covariates is None:
            covariates = tuple(c for c in header if re.fullmatch(r"x\d*", c))
        roles = {"covariates": covariates}
        for role in REQUIRED_ROLES[setting]:
            if role != "covariates":
                roles[role] = (getattr(self, role),)
        names = [c for cols in roles.values() for c in cols]
        if not covariates:
            raise SchemaError("No covariate columns")
        if len(set(names)) != len(names):
            raise SchemaError("Column roles must be disjoint")
        missing = [c for c in names if c not in header]
        if missing:
            raise SchemaError("Missing columns for setting {}: {}".format(setting, ", ".join(missing)))
        return roles


def _numeric(frame, column, allow_missing=None):
    """Parse ``column``; empty cells are legal only where ``allow_missing`` is True."""
    raw    = frame[column].str.strip()
    values = pd.to_numeric(raw.where(raw != ""), errors="coerce").to_numpy(dtype=float)
    infinite = np.flatnonzero(np.isinf(values))
    if infinite.size:
        i = infinite[0]
        raise ParseError("Non-finite value {!r} at row {}, column {}".format(raw.iloc[i], i + 1, column))
    for i in np.flatnonzero(np.isnan(values)):
        if raw.iloc[i] != "":
            raise ParseError("Non-numeric value {!r} at row {}, column {}".format(raw.iloc[i], i + 1, column))
        if allow_missing is None or not allow_missing[i]:
            raise ParseError("Missing value at row {}, column {}".format(i + 1, column))
    return values


def read_dataset(path, setting, schema):
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    roles = schema.resolve(setting, list(frame.columns))
    col   = lambda role: roles[role][0]
    x     = np.column_stack([_numeric(frame, c) for c in roles["covariates"]])
    if setting in (SETTING_MAR, SETTING_SHADOW):
        r  = _numeric(frame, col("response"))
        ry = _numeric(frame, col("outcome"), allow_missing=(r == 0))
        if setting == SETTING_MAR:
            return MAR(x, _numeric(frame, col("z")), r, ry), roles
        return Shadow(x, _numeric(frame, col("w")), r, ry), roles
    y = _numeric(frame, col("outcome"))
    if setting == SETTING_FULLDATA:
        return FullData(x, y), roles
    a = _numeric(frame, col("treatment"))
    if setting == SETTING_CATE:
        return CATE(x, a, y), roles
    if setting == SETTING_PROXIMAL:
        return Proximal(x, _numeric(frame, col("z")), _numeric(frame, col("w")), a, y), roles
    if setting == SETTING_DOSE:
        return DoseResponse(x, a, y), roles
    return IV(x, _numeric(frame, col("z")), a, y), roles

# Output -------------------------------------------------------------------------------------------

def write_csv(frame, path):
    """Write ``frame`` atomically (temporary file in the target directory, then rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            frame.to_csv(f, index=False, float_format="%.17g")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise

# Configuration ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    setting        : str   = SETTING_FULLDATA
    columns        : dict  = None
    basis          : str   = BASIS_BSPLINE
    J_grid         : tuple = None
    K              : int   = CV_DEFAULT_REPEATS
    split_fraction : float = CV_DEFAULT_SPLIT_FRACTION
    split          : bool  = None      # None: split except in the full-data setting.
    repeats        : int   = 1
    method         : str   = REGRESSION_FW_SERIES
    link           : str   = LINK_IDENTITY
    estimator      : str   = ESTIMATOR_FW
    seed           : int   = 0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError("Unknown setting {!r}".format(self.setting))
        if self.basis not in BASIS_FAMILIES:
            raise ConfigError("Unknown basis family {!r}".format(self.basis))
        if self.estimator not in (ESTIMATOR_FW, ESTIMATOR_LS):
            raise ConfigError("fit supports the fw and ls estimators")
        if self.K < 1 or self.repeats < 1:
            raise ConfigError("K >= 1 and repeats >= 1 required")
        if not 0 < self.split_fraction < 1:
            raise ConfigError("split_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SimulateConfig:
    experiment : ExperimentConfig
    timing     : bool = False       # False: seconds column written as 0 for byte-stable output.


def read_json(path):
    if path is None:
        return {}
    with open(path) as f:
        try:
            values = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("Invalid JSON in {}: {}".format(path, e))
    if not isinstance(values, dict):
        raise ConfigError("Configuration must be a JSON object")
    return values


JSON_TYPES = {
    tuple : (list, tuple),
    dict  : dict,
    str   : str,
    bool  : bool,
    int   : int,
    float : (int, float),
}


def check_types(cls, values):
    """Reject values whose JSON type does not match the field annotation; None keeps the default."""
    for f in fields(cls):
        value = values.get(f.name)
        if value is None or f.type not in JSON_TYPES:
            continue
        numeric = f.type in (int, float)
        if not isinstance(value, JSON_TYPES[f.type]) or (numeric and isinstance(value, bool)):
            raise ConfigError("{} must be of type {}, got {!r}".format(f.name, f.type.__name__, value))


def load_config(cls, values, overrides):
    """Defaults < file ``values`` < command-line ``overrides``; unknown keys are errors."""
    values = dict(values)
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError("Unknown configuration keys: {}".format(", ".join(sorted(unknown))))
    check_types(cls, values)
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e))


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FWREG_THREADS")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError("FWREG_THREADS must be an integer, got {!r}".format(env))


def _experiment(args):
    values = read_json(args.config)
    timing = values.pop("timing", False)
    experiment = load_config(ExperimentConfig, values, dict(
        seed         = args.seed,
        threads      = _threads(args),
        replications = args.replications,
        estimators   = args.estimators,
        n_grid       = args.n_grid,
        alpha_grid   = args.alpha_grid,
    ))
    return SimulateConfig(experiment, bool(timing))

# Commands -----------------------------------------------------------------------------------------

def cmd_fit(args):
    config = load_config(FitConfig, read_json(args.config),
        dict(setting=args.setting, seed=args.seed, basis=args.basis))
    schema = DatasetSchema.from_config(config.columns)
    records, roles = read_dataset(args.dataset, config.setting, schema)
    names = list(roles["treatment"] if config.setting == SETTING_DOSE else roles["covariates"])
    if args.eval is not None:
        points = pd.read_csv(args.eval, dtype=str, keep_default_na=False)
        missing = [c for c in names if c not in points.columns]
        if missing:
            raise SchemaError("Evaluation file lacks columns: {}".format(", ".join(missing)))
        eval_x = np.column_stack([_numeric(points, c) for c in names])
    else:
        eval_x = records.covariates

    # # #

    split = config.split if config.split is not None else config.setting != SETTING_FULLDATA
    plan  = PseudoPlan(config.setting, link=config.link, method=config.method, seed=config.seed)
    spec  = BasisSpec(family=config.basis, dim=records.covariates.shape[1])
    predictor = split_fit(records, plan, spec, J_grid=config.J_grid, K=config.K,
        split_fraction=config.split_fraction, seed=config.seed, split=split, repeats=config.repeats,
        estimator=config.estimator)
    estimate, variance, lower, upper = predictor.interval(eval_x)

    out = pd.DataFrame(eval_x, columns=names)
    out["estimate"] = estimate
    out["variance"] = variance
    out["ci_lower"] = lower
    out["ci_upper"] = upper
    write_csv(out, args.out or "predictions.csv")
    pseudo = predictor.pseudo
    print("setting:     {}".format(config.setting))
    print("records:     {}".format(len(records)))
    print("split:       {} nuisance / {} estimation{}".format(*predictor.split_sizes,
        "" if split else " (no split)"))
    print("nuisances:   {} ({}, {} link)".format(", ".join(predictor.nuisances) or "none",
        config.method, config.link))
    print("selected J:  {}".format(" ".join(str(J) for J in predictor.selected)))
    print("pseudo:      mean {:.6g}  var {:.6g}  min {:.6g}  max {:.6g}".format(
        float(np.mean(pseudo)), float(np.var(pseudo)), float(np.min(pseudo)), float(np.max(pseudo))))
    return EXIT_OK


def _simulate(args):
    config  = _experiment(args)
    results = run_replications(config.experiment)
    frame   = results_frame(results)
    if not config.timing:
        frame["seconds"] = 0.0
    return config, frame


def cmd_simulate(args):
    config, frame = _simulate(args)
    out = args.out or "."
    write_csv(frame, os.path.join(out, "results.csv"))
    if len(frame):
        write_csv(mse_ratios(frame, config.experiment.baseline), os.path.join(out, "ratios.csv"))
    logger.info("Wrote %d result rows to %s", len(frame), out)
    return EXIT_OK


def cmd_rates(args):
    if args.results is not None:
        frame = pd.read_csv(args.results)
        if not {"estimator", "n", "alpha", "mse"} <= set(frame.columns):
            raise SchemaError("Results file needs estimator, n, alpha and mse columns")
    else:
        _, frame = _simulate(args)
    write_csv(rate_slopes(frame), args.out or "rates.csv")
    return EXIT_OK

# Main ---------------------------------------------------------------------------------------------

def _csv_list(cast):
    def parse(value):
        try:
            return [cast(v) for v in value.split(",") if v]
        except ValueError:
            raise argparse.ArgumentTypeError("Invalid list {!r}".format(value))
    return parse


def build_parser():
    parser = argparse.ArgumentParser(prog="fwreg", description="Counterfactual series regression toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Increase logging verbosity")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config",  default=None,          help="JSON configuration file")
        p.add_argument("--seed",    default=None, type=int, help="Master seed")
        p.add_argument("--out",     default=None,          help="Output path")
        p.add_argument("--threads", default=None, type=int, help="Worker threads (env FWREG_THREADS)")

    def experiment(p):
        p.add_argument("--replications", default=None, type=int,             help="Replications per grid point")
        p.add_argument("--estimators",   default=None, type=_csv_list(str),   help="Comma-separated estimators")
        p.add_argument("--n-grid",       default=None, type=_csv_list(int),   help="Comma-separated sample sizes")
        p.add_argument("--alpha-grid",   default=None, type=_csv_list(float), help="Comma-separated alphas")

    fit = commands.add_parser("fit", help="Fit a counterfactual regression on a CSV dataset")
    common(fit)
    fit.add_argument("dataset",                                            help="Input CSV")
    fit.add_argument("--setting", default=None, choices=SETTINGS,         help="Problem setting")
    fit.add_argument("--basis",   default=None, choices=BASIS_FAMILIES,   help="Basis family")
    fit.add_argument("--eval",    default=None,                           help="CSV of evaluation points")
    fit.set_defaults(func=cmd_fit)

    simulate = commands.add_parser("simulate", help="Run a simulation experiment")
    common(simulate)
    experiment(simulate)
    simulate.set_defaults(func=cmd_simulate)

    rates = commands.add_parser("rates", help="Fit log-log MSE rate slopes")
    common(rates)
    experiment(rates)
    rates.add_argument("--results", default=None, help="Existing results.csv instead of a new simulation")
    rates.set_defaults(func=cmd_rates)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level  = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format = "%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FWRegError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO

if __name__ == "__main__":
    sys.exit(main())
