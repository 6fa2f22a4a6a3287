#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

# Basis --------------------------------------------------------------------------------------------

BASIS_POLYNOMIAL                  = "polynomial"
BASIS_TRIGONOMETRIC               = "trigonometric"
BASIS_BSPLINE                     = "bspline"
BASIS_NATURAL_SPLINE              = "natural-spline"
BASIS_PARTITION                   = "piecewise-partition"
BASIS_FAMILIES                    = (BASIS_POLYNOMIAL, BASIS_TRIGONOMETRIC, BASIS_BSPLINE,
                                     BASIS_NATURAL_SPLINE, BASIS_PARTITION)

MODE_ADDITIVE                     = "additive"
MODE_TENSOR                       = "tensor"

BASIS_MAX_J_CAP                   = 512
BASIS_DEFAULT_MAX_KNOTS           = 30

# Linear algebra -----------------------------------------------------------------------------------

EIGEN_RELATIVE_THRESHOLD          = 1e-10
EIGEN_FLOOR                       = 1e-300
LEVERAGE_ROUNDOFF                 = 1e-10
WELL_CONDITIONED_RATIO            = 1e-8

# Cross-validation ---------------------------------------------------------------------------------

CV_DEFAULT_REPEATS                = 5
CV_DEFAULT_SPLIT_FRACTION         = 0.5
CROSSFIT_DEFAULT_FOLDS            = 2
CI_Z_95                           = 1.96

# Pseudo-outcomes ----------------------------------------------------------------------------------

SETTING_FULLDATA                  = "fulldata"
SETTING_MAR                       = "mar"
SETTING_SHADOW                    = "shadow"
SETTING_CATE                      = "cate"
SETTING_PROXIMAL                  = "proximal"
SETTING_DOSE                      = "dose"
SETTING_IV                        = "iv"
SETTINGS                          = (SETTING_FULLDATA, SETTING_MAR, SETTING_SHADOW, SETTING_CATE,
                                     SETTING_PROXIMAL, SETTING_DOSE, SETTING_IV)

LINK_IDENTITY                     = "identity"
LINK_LOG                          = "log"
LINK_LOGIT                        = "logit"
LINKS                             = (LINK_IDENTITY, LINK_LOG, LINK_LOGIT)

PROPENSITY_CLIP_LOW               = 0.01
PROPENSITY_CLIP_HIGH              = 0.99
WEAK_INSTRUMENT_THRESHOLD         = 0.05
PROBE_MIN_MC_SIZE                 = 100

# Nuisance -----------------------------------------------------------------------------------------

REGRESSION_FW_SERIES              = "fw-series"
REGRESSION_LS_SERIES              = "ls-series"
REGRESSION_KNN                    = "knn"
REGRESSION_SMOOTHING_SPLINE       = "smoothing-spline"
REGRESSION_METHODS                = (REGRESSION_FW_SERIES, REGRESSION_LS_SERIES, REGRESSION_KNN,
                                     REGRESSION_SMOOTHING_SPLINE)

IRLS_MAX_ITERATIONS               = 50
IRLS_TOLERANCE                    = 1e-8
NPIV_INSTRUMENT_RATIO             = 2
NPIV_LAMBDA_GRID                  = (0.0, 1e-6, 1e-4, 1e-2, 1.0)
NPIV_DEFAULT_DEGREE               = 1
KNN_DEFAULT_K                     = 5
SMOOTHING_SPLINE_MIN_POINTS       = 5
PROPENSITY_DEFAULT_DEGREE         = 1
PLAN_MIN_FIT_SIZE                 = 10

# Simulation ---------------------------------------------------------------------------------------

DGP_KENNEDY                       = "kennedy-null-cate"
DGP_HEAVY_TAIL                    = "heavy-tail-covariate"
DGP_MAR                           = "mar-selection"
DGP_SHADOW                        = "shadow-mnar"
DGP_PROXIMAL                      = "proximal-linear"
DGP_SMOOTH                        = "smooth-fulldata"
DGP_DOSE                          = "dose-response"
DGP_IV                            = "iv-binary"

ESTIMATOR_PLUGIN                  = "plugin"
ESTIMATOR_XL                      = "xl"
ESTIMATOR_DRL_STUB                = "drl-stub"
ESTIMATOR_ORACLE_DRL              = "oracle-drl"
ESTIMATOR_FW                      = "fw"
ESTIMATOR_LS                      = "ls"
ESTIMATOR_CC_LS                   = "cc-ls"

DGP_MIN_N                         = 20
TEST_SAMPLE_SIZE                  = 500
RATE_MIN_GRID                     = 3
RATE_MIN_REPLICATIONS             = 20

# Exit codes ---------------------------------------------------------------------------------------

EXIT_OK                           = 0
EXIT_CONFIG                       = 2
EXIT_NUMERICAL                    = 3
EXIT_IO                           = 4

# Errors -------------------------------------------------------------------------------------------

class FWRegError(Exception):
    exit_code = EXIT_NUMERICAL

class ShapeError(FWRegError):                pass
class TruncationError(FWRegError):           pass
class DegenerateKnotsError(FWRegError):      pass
class SplitError(FWRegError):                pass
class FoldSizeError(FWRegError):             pass
class CapError(FWRegError):                  pass
class NumericalConsistencyError(FWRegError): pass
class NuisanceRangeError(FWRegError):        pass
class LinkDomainError(FWRegError):           pass
class DensityError(FWRegError):              pass
class WeakInstrumentError(FWRegError):       pass
class SampleSizeError(FWRegError):           pass
class FitError(FWRegError):                  pass
class SeparationError(FitError):             pass
class UnderIdentifiedError(FitError):        pass

class RegistryError(FWRegError):
    exit_code = EXIT_CONFIG

class GridError(FWRegError):
    exit_code = EXIT_CONFIG

class ConfigError(FWRegError):
    exit_code = EXIT_CONFIG

class SchemaError(FWRegError):
    exit_code = EXIT_CONFIG

class ParseError(FWRegError):
    exit_code = EXIT_CONFIG
