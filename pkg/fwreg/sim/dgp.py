#
# This file is part of fwreg.
#
# Copyright (c) 2024 The fwreg developers
# SPDX-License-Identifier: BSD-2-Clause

"""Synthetic data-generating processes with their true nuisances and regression targets."""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import expit

from fwreg.common import *
from fwreg.frontend.nuisance import IVNuisance
from fwreg.frontend.pseudo import NuisanceSet, FullData, MAR, Shadow, CATE, Proximal, DoseResponse, IV

# Helpers ------------------------------------------------------------------------------------------

def _col(f, j=0):
    f = np.asarray(f, dtype=float)
    return f[:, j] if f.ndim == 2 else f


def kennedy_mu(x):
    """Piecewise polynomial regression on [-1, 1], held constant beyond the interval."""
    x = np.clip(np.asarray(x, dtype=float), -1, 1)
    return np.select(
        [x < -0.5, x < 0.0, x < 0.5],
        [(x + 2)**2/2, x/2 + 0.875, -5*(x - 0.2)**2 + 1.075],
        x + 0.125)


class _DGP:
    """Base process: ``covariates`` draws the regression covariates, ``given`` the rest of the row."""
    setting = None

    def covariates(self, size, rng):
        return rng.uniform(-1, 1, size=(size, 1))

    def sample(self, n, rng):
        return self.given(self.covariates(n, rng), rng)

    def sample_given_x(self, x, size, rng):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.given(np.tile(x, (size, 1)), rng)

# Full Data ----------------------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothFullData(_DGP):
    """Y = m(X) + N(0, 1) with m a trigonometric series of smoothness ``alpha``."""
    alpha : float = 2.0
    terms : int   = 200
    setting = SETTING_FULLDATA

    def target(self, x):
        u = _col(x)
        k = np.arange(1, self.terms + 1)
        c = k**(-(self.alpha + 0.5))
        return (np.cos(np.pi*np.outer(u, k)) + np.sin(np.pi*np.outer(u, k))) @ c

    def given(self, x, rng):
        return FullData(x, self.target(x) + rng.normal(size=x.shape[0]))

    @property
    def nuisances(self):
        return NuisanceSet()

# Missing Data -------------------------------------------------------------------------------------

@dataclass(frozen=True)
class MARSelection(_DGP):
    """Response missing at random given (X, Z)."""
    noise = 0.5
    setting = SETTING_MAR

    def target(self, x):
        return np.sin(np.pi*_col(x))

    def mu(self, xz):
        return np.sin(np.pi*_col(xz, 0)) + 0.5*_col(xz, 1)

    def pi(self, xz):
        return expit(0.5 + _col(xz, 0) - 0.5*_col(xz, 1))

    def given(self, x, rng):
        z  = rng.normal(size=x.shape[0])
        xz = np.column_stack([x[:, 0], z])
        y  = self.mu(xz) + self.noise*rng.normal(size=x.shape[0])
        r  = (rng.random(x.shape[0]) < self.pi(xz)).astype(float)
        return MAR(x, z, r, np.where(r == 1, y, np.nan))

    @property
    def nuisances(self):
        return NuisanceSet(pi=self.pi, mu=self.mu)


@dataclass(frozen=True)
class ShadowMNAR(_DGP):
    """Response missing not at random; W = Y + noise is a shadow variable with eta*(x, w) = w."""
    noise = 0.5
    setting = SETTING_SHADOW

    def target(self, x):
        return np.sin(np.pi*_col(x))

    def pi(self, xy):
        return expit(0.5 + 0.5*_col(xy, 0) + _col(xy, 1))

    def eta(self, xw):
        return _col(xw, 1)

    def given(self, x, rng):
        n = x.shape[0]
        y = self.target(x) + self.noise*rng.normal(size=n)
        w = y + self.noise*rng.normal(size=n)
        r = (rng.random(n) < self.pi(np.column_stack([x[:, 0], y]))).astype(float)
        return Shadow(x, w, r, np.where(r == 1, y, np.nan))

    @property
    def nuisances(self):
        return NuisanceSet(pi=self.pi, eta=self.eta)

# Treatment Effects --------------------------------------------------------------------------------

@dataclass(frozen=True)
class KennedyNullCATE(_DGP):
    """Discontinuous propensity 0.1 + 0.8*1{x > 0}, identical arm regressions (tau* = 0)."""
    heavy_tail : bool = False
    setting = SETTING_CATE

    def covariates(self, size, rng):
        if not self.heavy_tail:
            return rng.uniform(-1, 1, size=(size, 1))
        label = rng.random(size) < 0.5
        return np.where(label, rng.uniform(-1, 1, size), rng.normal(size=size))[:, None]

    def target(self, x):
        return np.zeros(np.asarray(x).shape[0])

    def pi(self, x):
        return 0.1 + 0.8*(_col(x) > 0)

    def mu(self, x):
        return kennedy_mu(_col(x))

    def given(self, x, rng):
        n = x.shape[0]
        a = (rng.random(n) < self.pi(x)).astype(float)
        return CATE(x, a, self.mu(x) + rng.normal(size=n))

    @property
    def nuisances(self):
        return NuisanceSet(pi=self.pi, mu0=self.mu, mu1=self.mu)


@dataclass(frozen=True)
class ProximalLinear(_DGP):
    """Linear structural equations with unmeasured U and proxies Z = U + e_z, W = U + e_w.

    "Linear" refers to the structural equations and the outcome bridge, which is linear,
    h*(w, a, x) = b0 + ba a + bx x + bu w. The treatment bridge is not: treatment depends on (Z, X)
    only, so q*(z, a, x) = 1/P(A=a | Z=z, X=x) = 1 + exp(-(2a - 1)(t0 + tz z + tx x)), an inverse
    logistic that sieve fits only approximate.
    """
    b0    : float = 0.5
    ba    : float = 1.0
    bx    : float = 0.5
    bu    : float = 1.0
    t0    : float = 0.0
    tz    : float = 0.5
    tx    : float = 0.25
    proxy : float = 0.3
    noise : float = 0.5
    setting = SETTING_PROXIMAL

    def covariates(self, size, rng):
        return rng.normal(size=(size, 1))

    def target(self, x):
        return np.full(np.asarray(x).shape[0], self.ba)

    def treatment(self, z, x):
        return expit(self.t0 + self.tz*z + self.tx*x)

    def h_bridge(self, f):
        w, a, x = _col(f, 0), _col(f, 1), _col(f, 2)
        return self.b0 + self.ba*a + self.bx*x + self.bu*w

    def q_bridge(self, f):
        z, a, x = _col(f, 0), _col(f, 1), _col(f, 2)
        p = self.treatment(z, x)
        return np.where(a == 1, 1/p, 1/(1 - p))

    def given(self, x, rng):
        n  = x.shape[0]
        u  = rng.normal(size=n)
        z  = u + self.proxy*rng.normal(size=n)
        w  = u + self.proxy*rng.normal(size=n)
        a  = (rng.random(n) < self.treatment(z, x[:, 0])).astype(float)
        y  = self.b0 + self.ba*a + self.bx*x[:, 0] + self.bu*u + self.noise*rng.normal(size=n)
        return Proximal(x, z, w, a, y)

    @property
    def nuisances(self):
        return NuisanceSet(h_bridge=self.h_bridge, q_bridge=self.q_bridge)


@dataclass(frozen=True)
class DoseResponseGaussian(_DGP):
    """L ~ N(0, 1), A = 0.5 L + N(0, 1), E[Y | A, L] = sin(A) + 0.5 L + 0.25 A L."""
    noise = 0.5
    setting = SETTING_DOSE

    def covariates(self, size, rng):
        return np.sqrt(1.25)*rng.normal(size=(size, 1))

    def target(self, a):
        return np.sin(_col(a))

    def mu(self, al):
        a, l = _col(al, 0), _col(al, 1)
        return np.sin(a) + 0.5*l + 0.25*a*l

    def dens_ratio(self, al):
        a, l = _col(al, 0), _col(al, 1)
        return stats.norm.pdf(a, scale=np.sqrt(1.25))/stats.norm.pdf(a, loc=0.5*l)

    def marg_mu(self, a):
        return np.sin(_col(a))

    def _outcome(self, a, l, rng):
        return DoseResponse(l, a, self.mu(np.column_stack([a, l])) + self.noise*rng.normal(size=a.size))

    def sample(self, n, rng):
        l = rng.normal(size=n)
        return self._outcome(0.5*l + rng.normal(size=n), l, rng)

    def given(self, a, rng):
        # L | A = a is N(0.4 a, 0.8).
        a = _col(a)
        l = 0.4*a + np.sqrt(0.8)*rng.normal(size=a.size)
        return self._outcome(a, l, rng)

    @property
    def nuisances(self):
        return NuisanceSet(mu=self.mu, dens_ratio=self.dens_ratio, marg_mu=self.marg_mu)


@dataclass(frozen=True)
class IVBinary(_DGP):
    """Binary instrument and treatment with unmeasured confounding; CATE 1 + x/2."""
    setting = SETTING_IV

    def target(self, x):
        return 1 + 0.5*_col(x)

    def fz(self, x):
        return expit(0.5*_col(x))

    def a_mean(self, z):
        return stats.norm.cdf((2*z - 1)/np.sqrt(2))

    def given(self, x, rng):
        n = x.shape[0]
        u = rng.normal(size=n)
        z = (rng.random(n) < self.fz(x)).astype(float)
        a = (-1 + 2*z + u + rng.normal(size=n) > 0).astype(float)
        y = self.target(x)*a + x[:, 0]**2 + u + 0.5*rng.normal(size=n)
        return IV(x, z, a, y)

    @property
    def nuisances(self):
        p1, p0 = self.a_mean(1.0), self.a_mean(0.0)
        g = lambda x: _col(x)**2
        return NuisanceSet(iv=IVNuisance(
            fz = self.fz,
            y1 = lambda x: self.target(x)*p1 + g(x),
            y0 = lambda x: self.target(x)*p0 + g(x),
            a1 = lambda x: np.full(np.asarray(x).shape[0], p1),
            a0 = lambda x: np.full(np.asarray(x).shape[0], p0),
        ))

# Generation ---------------------------------------------------------------------------------------

DGPS = {
    DGP_KENNEDY    : lambda **kw: KennedyNullCATE(heavy_tail=False),
    DGP_HEAVY_TAIL : lambda **kw: KennedyNullCATE(heavy_tail=True),
    DGP_MAR        : lambda **kw: MARSelection(),
    DGP_SHADOW     : lambda **kw: ShadowMNAR(),
    DGP_PROXIMAL   : lambda **kw: ProximalLinear(),
    DGP_SMOOTH     : lambda **kw: SmoothFullData(alpha=kw.get("smoothness", 2.0)),
    DGP_DOSE       : lambda **kw: DoseResponseGaussian(),
    DGP_IV         : lambda **kw: IVBinary(),
}


@dataclass(frozen=True)
class DGPSpec:
    kind   : str
    n      : int
    seed   : int  = 0
    extras : dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DGPS:
            raise RegistryError("Unknown data-generating process {!r}".format(self.kind))
        if self.n < DGP_MIN_N:
            raise SampleSizeError("Simulated samples need n >= {}, got {}".format(DGP_MIN_N, self.n))

    @property
    def process(self):
        return DGPS[self.kind](**self.extras)


@dataclass(frozen=True, eq=False)
class Simulated:
    records : object
    truth   : _DGP


def generate(spec):
    """Draw ``spec.n`` records; every draw comes from ``default_rng(spec.seed)``."""
    process = spec.process
    return Simulated(process.sample(spec.n, np.random.default_rng(spec.seed)), process)


def dgp_kennedy(n, seed=0):
    return generate(DGPSpec(DGP_KENNEDY, n, seed))


def dgp_heavy_tail(n, seed=0):
    return generate(DGPSpec(DGP_HEAVY_TAIL, n, seed))


def dgp_mar(n, seed=0):
    return generate(DGPSpec(DGP_MAR, n, seed))


def dgp_shadow(n, seed=0):
    return generate(DGPSpec(DGP_SHADOW, n, seed))


def dgp_proximal_linear(n, seed=0):
    return generate(DGPSpec(DGP_PROXIMAL, n, seed))


def dgp_smooth(n, seed=0, smoothness=2.0):
    return generate(DGPSpec(DGP_SMOOTH, n, seed, {"smoothness": smoothness}))


def dgp_dose_response(n, seed=0):
    return generate(DGPSpec(DGP_DOSE, n, seed))


def dgp_iv(n, seed=0):
    return generate(DGPSpec(DGP_IV, n, seed))
