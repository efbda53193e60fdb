"""Closed forms for the CEV model ``sigma(S) = sigma0 S^beta``, -1/2 <= beta < 0.

Formulas are written with ``rho_abs = |rho|`` and ``theta = sign(rho)``; the
public functions take a :class:`Market` with signed carry and convert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import CevSpec, Market, Region, classify_region
from .ratefn import RHO_EPS, PathSample, RateResult


@dataclass(frozen=True)
class CevRateInputs:
    spec: CevSpec
    market: Market

    @property
    def theta(self) -> int:
        return 1 if self.market.rho >= 0 else -1

    @property
    def rho_abs(self) -> float:
        return abs(self.market.rho)


def _artanh(z):
    if not abs(z) < 1.0:
        raise DomainError(f"arctanh argument {z} outside (-1, 1); strike on a region boundary?")
    return 0.5 * math.log((1.0 + z) / (1.0 - z))


def y0_monotone(spec: CevSpec, market: Market, K: float) -> float:
    """Initial slope ``g'(0)`` of the region 1/2 path."""
    b, rho = spec.abs_beta, abs(market.rho)
    k = math.log(K / market.s0)
    e = math.exp(-2.0 * b * rho)
    return rho * (2.0 * math.exp(b * (k - rho)) - (1.0 + e)) / (1.0 - e)


def y0_region3(spec: CevSpec, market: Market, K: float) -> float:
    """Initial slope ``g'(0)`` of the region 3 path; ``|y0| < |rho|`` inside the region."""
    b, rho = spec.abs_beta, abs(market.rho)
    k = math.log(K / market.s0)
    return rho * (math.exp(b * k) - math.cosh(b * rho)) / math.sinh(b * rho)


def _rate_rho0(spec, market, K):
    b, s = spec.abs_beta, spec.sigma0
    y = market.s0**b * math.expm1(b * math.log(K / market.s0)) / (b * s)
    return 0.5 * y * y


def cev_rate_closed(spec: CevSpec, market: Market, K: float) -> RateResult:
    inp = CevRateInputs(spec, market)
    b, s, s0 = spec.abs_beta, spec.sigma0, market.s0
    theta, rho = inp.theta, inp.rho_abs
    region = classify_region(market, K)
    if region == Region.ATM:
        return RateResult(I=0.0, C=0.0, region=region, branch="atm")
    if rho < RHO_EPS:
        I = _rate_rho0(spec, market, K)
        return RateResult(I=I, C=2.0 * I, region=region, branch="rho0")
    var0 = s * s * s0 ** (-2.0 * b)
    pref = s0 ** (2.0 * b) / (s * s)

    if region in (Region.REGION1, Region.REGION2):
        x = math.log(K / s0) - theta * rho
        if theta > 0:
            fac = rho / -math.expm1(-2.0 * rho * b)
        else:
            fac = rho / math.expm1(2.0 * rho * b)
        I = pref / b * math.expm1(b * x) ** 2 * fac
        y0 = y0_monotone(spec, market, K)
        branch = "up" if region == Region.REGION1 else "down"
        return RateResult(I=I, C=(y0 * y0 - rho * rho) / var0, region=region, branch=branch)

    y0 = y0_region3(spec, market, K)
    z = y0 / rho
    # (1 - z^2) exp(-2 theta artanh z) == (1 - theta z)^2
    if theta > 0:
        fac = -math.expm1(-2.0 * b * rho)
    else:
        fac = math.expm1(2.0 * b * rho)
    I = pref / (4.0 * b) * rho * (1.0 - theta * z) ** 2 * fac
    C = (y0 * y0 - rho * rho) / var0
    g_star = None
    monotone = True
    branch = "up" if y0 >= 0 else "down"
    if y0 < 0 and b * rho + _artanh(z) > 0:
        # slope vanishes where the tanh argument crosses zero
        g_star = 0.5 * math.log1p(-z * z) / b
        monotone = False
        branch = "dip"
    return RateResult(I=I, C=C, region=region, g_star=g_star, monotone=monotone, branch=branch)


def cev_optimal_path(spec: CevSpec, market: Market, K: float, n_samples: int = 101) -> PathSample:
    b, rho = spec.abs_beta, abs(market.rho)
    s0 = market.s0
    k = math.log(K / s0)
    t = np.linspace(0.0, 1.0, n_samples)
    region = classify_region(market, K)
    if region == Region.ATM:
        return PathSample(t=t, g=market.rho * t, dg=np.full_like(t, market.rho))
    if rho < RHO_EPS:
        # rho = 0: sigma0 (s0 e^g)^beta g' is constant, so e^{|beta| g} is linear in t
        gt = np.log1p(t * math.expm1(b * k)) / b
        dg = math.expm1(b * k) / (b * (1.0 + t * math.expm1(b * k)))
        return PathSample(t=t, g=gt, dg=dg)

    if region in (Region.REGION1, Region.REGION2):
        y0 = y0_monotone(spec, market, K)
        e = np.exp(-2.0 * b * rho * t)
        D = y0 + rho - (y0 - rho) * e
        if np.any(D <= 0):
            raise DomainError("log argument non-positive; strike mis-classified")
        g = (np.log(D) - math.log(2.0 * rho)) / b + rho * t
        dg = rho * (y0 + rho + (y0 - rho) * e) / D
        g[0], g[-1] = 0.0, k
        return PathSample(t=t, g=g, dg=dg)

    y0 = y0_region3(spec, market, K)
    z = y0 / rho
    a = _artanh(z)
    w = b * rho * t + a
    g = (0.5 * math.log1p(-z * z) + np.log(np.cosh(w))) / b
    dg = rho * np.tanh(w)
    g[0], g[-1] = 0.0, k
    t_star = -a / (b * rho) if 0.0 < -a / (b * rho) < 1.0 else None
    return PathSample(t=t, g=g, dg=dg, t_star=t_star)


def cev_atm_vol(spec: CevSpec, market: Market) -> float:
    b, s, s0 = spec.abs_beta, spec.sigma0, market.s0
    rho = market.rho
    base = s * s0 ** (-b)
    if abs(rho) < RHO_EPS:
        return base
    eps = 2.0 * rho * b
    return base * math.sqrt(-math.expm1(-eps) / eps)


def cev_atm_skew(spec: CevSpec) -> float:
    """ATM skew of the asymptotic smile divided by the ATM level; independent of the carry."""
    return -0.5 * spec.abs_beta


def cev_bbf_vol(spec: CevSpec, market: Market, K: float) -> float:
    b, s, s0 = spec.abs_beta, spec.sigma0, market.s0
    k = math.log(K / s0)
    if k == 0.0:
        return s * s0 ** (-b)
    # K^b - s0^b without cancellation near the spot
    return s * b * k / (s0**b * math.expm1(b * k))


def novikov_horizon(spec: CevSpec, r: float) -> float:
    """Largest maturity for which the measure-change expectation is known to be finite.

    The bounds only bind for a positive rate.  For ``r <= 0`` the square-root
    closed form stays finite for every ``T`` and the general-``beta`` condition
    holds trivially, so ``inf`` is returned.
    """
    if r <= 0:
        return math.inf
    b = spec.abs_beta
    if b == 0.5:
        return 2.0 / r
    if b >= 1.0 / (2.0 * math.pi):
        return math.inf
    return -math.log1p(-2.0 * b * math.pi) / (2.0 * b * r)
