#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

import dataclasses
from dataclasses import dataclass

import numpy as np

from fwreg.common import *
from fwreg.frontend.nuisance import features

# Observed Records ---------------------------------------------------------------------------------

def _matrix(v):
    v = np.asarray(v, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def _vector(v):
    return np.asarray(v, dtype=float).ravel()


def _binary(name, v):
    v = _vector(v)
    if not np.all((v == 0) | (v == 1)):
        raise SchemaError("{} must take values in {{0, 1}}".format(name))
    return v


class _Records:
    """Batch of observed-data rows; every field holds one entry per row."""
    matrices = ()
    vectors  = ()
    binaries = ()

    def __post_init__(self):
        for name in self.matrices:
            object.__setattr__(self, name, _matrix(getattr(self, name)))
        for name in self.vectors:
            object.__setattr__(self, name, _vector(getattr(self, name)))
        for name in self.binaries:
            object.__setattr__(self, name, _binary(name, getattr(self, name)))
        sizes = {getattr(self, f.name).shape[0] for f in dataclasses.fields(self)}
        if len(sizes) > 1:
            raise ShapeError("{} fields have mismatched lengths {}".format(type(self).__name__, sorted(sizes)))

    def __len__(self):
        return getattr(self, dataclasses.fields(self)[0].name).shape[0]

    def take(self, idx):
        return type(self)(**{f.name: getattr(self, f.name)[idx] for f in dataclasses.fields(self)})


class _Missing(_Records):
    def __post_init__(self):
        _Records.__post_init__(self)
        ry = self.ry.copy()
        if np.any(np.isnan(ry[self.r == 1])):
            raise SchemaError("Observed rows (r=1) need a response")
        # Missing responses are never stored.
        ry[self.r == 0] = np.nan
        object.__setattr__(self, "ry", ry)

    @property
    def observed(self):
        return np.flatnonzero(self.r == 1)


@dataclass(frozen=True, eq=False)
class FullData(_Records):
    x : np.ndarray
    y : np.ndarray
    matrices = ("x",)
    vectors  = ("y",)

    @property
    def covariates(self):
        return self.x


@dataclass(frozen=True, eq=False)
class MAR(_Missing):
    x  : np.ndarray
    z  : np.ndarray
    r  : np.ndarray
    ry : np.ndarray
    matrices = ("x", "z")
    vectors  = ("ry",)
    binaries = ("r",)

    @property
    def covariates(self):
        return self.x


@dataclass(frozen=True, eq=False)
class Shadow(_Missing):
    x  : np.ndarray
    w  : np.ndarray
    r  : np.ndarray
    ry : np.ndarray
    matrices = ("x", "w")
    vectors  = ("ry",)
    binaries = ("r",)

    @property
    def covariates(self):
        return self.x


@dataclass(frozen=True, eq=False)
class CATE(_Records):
    x : np.ndarray
    a : np.ndarray
    y : np.ndarray
    matrices = ("x",)
    vectors  = ("y",)
    binaries = ("a",)

    @property
    def covariates(self):
        return self.x


@dataclass(frozen=True, eq=False)
class Proximal(_Records):
    x : np.ndarray
    z : np.ndarray
    w : np.ndarray
    a : np.ndarray
    y : np.ndarray
    matrices = ("x", "z", "w")
    vectors  = ("y",)
    binaries = ("a",)

    @property
    def covariates(self):
        return self.x


@dataclass(frozen=True, eq=False)
class DoseResponse(_Records):
    l : np.ndarray
    a : np.ndarray
    y : np.ndarray
    matrices = ("l",)
    vectors  = ("a", "y")

    @property
    def covariates(self):
        return self.a[:, None]


@dataclass(frozen=True, eq=False)
class IV(_Records):
    x : np.ndarray
    z : np.ndarray
    a : np.ndarray
    y : np.ndarray
    matrices = ("x",)
    vectors  = ("y",)
    binaries = ("z", "a")

    @property
    def covariates(self):
        return self.x


RECORD_TYPES = {
    SETTING_FULLDATA : FullData,
    SETTING_MAR      : MAR,
    SETTING_SHADOW   : Shadow,
    SETTING_CATE     : CATE,
    SETTING_PROXIMAL : Proximal,
    SETTING_DOSE     : DoseResponse,
    SETTING_IV       : IV,
}

# Nuisance Set -------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NuisanceSet:
    """Fitted nuisances, each a callable on a column-stacked feature matrix.

    pi: [x, z] (MAR), [x, y] (shadow, extended propensity) or [x] (CATE). mu: [x, z] (MAR) or
    [a, l] (dose). mu0/mu1: [x]. eta: [x, w]. h_bridge: [w, a, x]. q_bridge: [z, a, x].
    dens_ratio: [a, l]. marg_mu: a. iv: ``IVNuisance``.
    """
    pi         : object = None
    mu         : object = None
    mu0        : object = None
    mu1        : object = None
    eta        : object = None
    h_bridge   : object = None
    q_bridge   : object = None
    dens_ratio : object = None
    marg_mu    : object = None
    iv         : object = None


def _check_propensity(p, closed_above=False):
    p = np.asarray(p, dtype=float)
    upper = (p <= 1) if closed_above else (p < 1)
    if not np.all((p > 0) & upper):
        raise NuisanceRangeError("Propensity values outside {}".format("(0, 1]" if closed_above else "(0, 1)"))
    return p

# Pseudo-Outcomes ----------------------------------------------------------------------------------

def _weighted_missing(r, ry, weight, fill):
    out = np.array(fill, dtype=float)
    obs = np.flatnonzero(r == 1)
    out[obs] = ry[obs]/weight - (1/weight - 1)*fill[obs]
    return out


def mar_pseudo(rec, nu):
    """(R/pi) Y - (R/pi - 1) mu, with Y read on observed rows only."""
    obs = rec.observed
    mu  = nu.mu(features(rec.x, rec.z))
    pi  = _check_propensity(nu.pi(features(rec.x[obs], rec.z[obs])), closed_above=True)
    return _weighted_missing(rec.r, rec.ry, pi, mu)


def mar_ipw_pseudo(rec, nu):
    obs = rec.observed
    out = np.zeros(len(rec))
    out[obs] = rec.ry[obs]/_check_propensity(nu.pi(features(rec.x[obs], rec.z[obs])), closed_above=True)
    return out


def mar_regression_pseudo(rec, nu):
    return nu.mu(features(rec.x, rec.z))


def shadow_pseudo(rec, nu):
    obs = rec.observed
    eta = nu.eta(features(rec.x, rec.w))
    e   = _check_propensity(nu.pi(features(rec.x[obs], rec.ry[obs])), closed_above=True)
    return _weighted_missing(rec.r, rec.ry, e, eta)


def cate_dr_pseudo(rec, nu):
    pi  = _check_propensity(nu.pi(rec.x))
    mu0 = nu.mu0(rec.x)
    mu1 = nu.mu1(rec.x)
    mua = np.where(rec.a == 1, mu1, mu0)
    return (rec.a - pi)/(pi*(1 - pi))*(rec.y - mua) + mu1 - mu0


def proximal_cate_pseudo(rec, nu):
    ones, zeros = np.ones(len(rec)), np.zeros(len(rec))
    q1 = nu.q_bridge(features(rec.z, ones, rec.x))
    q0 = nu.q_bridge(features(rec.z, zeros, rec.x))
    h1 = nu.h_bridge(features(rec.w, ones, rec.x))
    h0 = nu.h_bridge(features(rec.w, zeros, rec.x))
    ha = np.where(rec.a == 1, h1, h0)
    return (rec.a*q1 - (1 - rec.a)*q0)*(rec.y - ha) + h1 - h0


def _link_terms(link, mu):
    """(inverse-link value g^-1(mu), denominator g'(g^-1(mu)) term) for a fitted mean mu."""
    if link == LINK_IDENTITY:
        return mu, np.ones_like(mu)
    if link == LINK_LOG:
        if np.any(mu <= 0):
            raise LinkDomainError("Log link needs positive fitted means")
        return np.log(mu), mu
    if link == LINK_LOGIT:
        if np.any((mu <= 0) | (mu >= 1)):
            raise LinkDomainError("Logit link needs fitted means in (0, 1)")
        return np.log(mu/(1 - mu)), mu*(1 - mu)
    raise RegistryError("Unknown link {!r}".format(link))


def glm_cate_pseudo(rec, nu, link=LINK_IDENTITY):
    if link == LINK_IDENTITY:
        return cate_dr_pseudo(rec, nu)
    pi  = _check_propensity(nu.pi(rec.x))
    mu0 = nu.mu0(rec.x)
    mu1 = nu.mu1(rec.x)
    mua = np.where(rec.a == 1, mu1, mu0)
    g0, _ = _link_terms(link, mu0)
    g1, _ = _link_terms(link, mu1)
    _, da = _link_terms(link, mua)
    fa    = np.where(rec.a == 1, pi, 1 - pi)
    sign  = np.where(rec.a == 1, 1.0, -1.0)
    return sign*(rec.y - mua)/(fa*da) + g1 - g0


def dose_response_pseudo(rec, nu):
    al    = features(rec.a, rec.l)
    ratio = np.asarray(nu.dens_ratio(al), dtype=float)
    if np.any(ratio <= 0) or not np.all(np.isfinite(ratio)):
        raise DensityError("Density ratio must be positive and finite")
    return (rec.y - nu.mu(al))*ratio + nu.marg_mu(rec.a)


def iv_cate_pseudo(rec, nu):
    iv    = nu.iv
    fz1   = _check_propensity(iv.fz(rec.x))
    delta = iv.delta(rec.x)
    beta  = iv.beta(rec.x)
    fz    = np.where(rec.z == 1, fz1, 1 - fz1)
    resid = rec.y - rec.a*beta - iv.y0(rec.x) + iv.a0(rec.x)*beta
    return (2*rec.z - 1)/fz*resid/delta + beta


def mixed_bias_pseudo(rec, q, h, g1=None, g2=None, g3=None, g4=None):
    """q h g1 + q g2 + h g3 + g4, with every factor a callable on the records (None: zero)."""
    def value(g):
        return np.zeros(len(rec)) if g is None else np.asarray(g(rec), dtype=float)
    qv, hv = value(q), value(h)
    return qv*hv*value(g1) + qv*value(g2) + hv*value(g3) + value(g4)


PSEUDO_CONSTRUCTORS = {
    SETTING_FULLDATA : lambda rec, nu: rec.y.copy(),
    SETTING_MAR      : mar_pseudo,
    SETTING_SHADOW   : shadow_pseudo,
    SETTING_CATE     : cate_dr_pseudo,
    SETTING_PROXIMAL : proximal_cate_pseudo,
    SETTING_DOSE     : dose_response_pseudo,
    SETTING_IV       : iv_cate_pseudo,
}


def pseudo_outcomes(setting, rec, nu, link=LINK_IDENTITY):
    if setting not in PSEUDO_CONSTRUCTORS:
        raise RegistryError("Unknown setting {!r}".format(setting))
    if not isinstance(rec, RECORD_TYPES[setting]):
        raise SchemaError("Setting {} needs {} records".format(setting, RECORD_TYPES[setting].__name__))
    if setting == SETTING_CATE:
        return glm_cate_pseudo(rec, nu, link)
    return PSEUDO_CONSTRUCTORS[setting](rec, nu)

# Conditional Bias Probe ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    grid      : np.ndarray
    bias      : np.ndarray     # Monte Carlo mean of f(O) - m*(x).
    se        : np.ndarray
    predicted : np.ndarray     # Product-form bias from true and fitted nuisances (NaN: not available).


def _product_bias(setting, rec, truth, hat):
    if setting == SETTING_MAR:
        xz = features(rec.x, rec.z)
        return (truth.pi(xz)/hat.pi(xz) - 1)*(truth.mu(xz) - hat.mu(xz))
    if setting == SETTING_CATE:
        pi, pi_hat = truth.pi(rec.x), hat.pi(rec.x)
        return ((pi/pi_hat - 1)*(truth.mu1(rec.x) - hat.mu1(rec.x))
            - ((1 - pi)/(1 - pi_hat) - 1)*(truth.mu0(rec.x) - hat.mu0(rec.x)))
    if setting == SETTING_PROXIMAL:
        za   = features(rec.z, rec.a, rec.x)
        wa   = features(rec.w, rec.a, rec.x)
        sign = 2*rec.a - 1
        return sign*(hat.q_bridge(za) - truth.q_bridge(za))*(truth.h_bridge(wa) - hat.h_bridge(wa))
    return None


def conditional_bias_probe(setting, dgp, hat, grid, mc_size, seed=None, link=LINK_IDENTITY):
    """Monte Carlo conditional bias of the pseudo-outcome at each grid point.

    ``dgp`` provides ``sample_given_x(x, size, rng)``, ``target(x)`` and the true ``nuisances``.
    """
    if mc_size < PROBE_MIN_MC_SIZE:
        raise SampleSizeError("Probe needs mc_size >= {}, got {}".format(PROBE_MIN_MC_SIZE, mc_size))
    grid = np.asarray(grid, dtype=float)
    rng  = np.random.default_rng(seed)
    bias, se, predicted = [], [], []
    for x in grid:
        rec   = dgp.sample_given_x(x, mc_size, rng)
        delta = pseudo_outcomes(setting, rec, hat, link) - dgp.target(np.atleast_2d(x))[0]
        bias.append(delta.mean())
        se.append(delta.std(ddof=1)/np.sqrt(mc_size))
        product = _product_bias(setting, rec, dgp.nuisances, hat)
        predicted.append(np.nan if product is None else product.mean())
    return ProbeResult(grid, np.array(bias), np.array(se), np.array(predicted))
