"""Asymptotic implied volatilities built from the rate function.

``sigma^2 = (k - rho)^2 / (2 I)`` generalises the zero-carry harmonic-mean
limit ``k / int_{s0}^K dS / (S sigma(S))``; near the forward the ratio is
0/0, so a thin window around ``x = 0`` uses the ATM level and skew instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from ._quad import integrate_oriented
from .errors import DomainError, NumericError, ShortVolError
from .model import Market, VolatilityModel, classify_region
from .ratefn import RHO_EPS, rate_expansion_small_rho, rate_function

log = logging.getLogger(__name__)

ATM_SERIES_WINDOW = 1e-5
_ATM_EPSABS = 1e-15
_ATM_EPSREL = 1e-13


@dataclass(frozen=True)
class SmilePoint:
    K: float
    x: float
    vol: float
    source: str
    region: str = ""
    error: str | None = None


def _sig2(model, s0, u):
    return float(model.sigma(s0 * math.exp(u))) ** 2


def atm_vol_rho(model: VolatilityModel, market: Market) -> float:
    """ATM level: the local variance averaged over log-prices between spot and forward."""
    s0, rho = market.s0, market.rho
    if abs(rho) < RHO_EPS:
        return float(model.sigma(s0))
    I2 = integrate_oriented(lambda u: _sig2(model, s0, u), 0.0, rho, epsabs=_ATM_EPSABS, epsrel=_ATM_EPSREL)
    return math.sqrt(I2 / rho)


def atm_skew_rho(model: VolatilityModel, market: Market) -> float:
    """ATM slope ``d sigma / dx`` of the asymptotic smile, divided by the ATM level."""
    s0, rho = market.s0, market.rho
    if abs(rho) < RHO_EPS:
        return 0.5 * s0 * float(model.dsigma(s0)) / float(model.sigma(s0))
    v_fwd = _sig2(model, s0, rho)
    tol = dict(epsabs=_ATM_EPSABS, epsrel=_ATM_EPSREL)
    I2 = integrate_oriented(lambda u: _sig2(model, s0, u), 0.0, rho, **tol)

    def weighted_gap(u):
        v = _sig2(model, s0, u)
        return v * (v - v_fwd)

    num = integrate_oriented(weighted_gap, 0.0, rho, **tol)
    return -0.5 * num / (I2 * I2)


def bbf_vol(model: VolatilityModel, market: Market, K: float) -> SmilePoint:
    """Zero-carry limit: log-strike over ``int_{s0}^K dS / (S sigma(S))``."""
    s0 = market.s0
    k = math.log(K / s0)
    x = k - market.rho
    if k == 0.0:
        vol = float(model.sigma(s0))
    else:
        y = integrate_oriented(lambda z: 1.0 / float(model.sigma(s0 * math.exp(z))), 0.0, k)
        vol = k / y
    return SmilePoint(K=K, x=x, vol=vol, source="bbf", region=str(classify_region(market, K)))


def implied_vol_asymptotic(model: VolatilityModel, market: Market, K: float) -> SmilePoint:
    if not K > 0:
        raise DomainError("strike must be positive")
    s0, rho = market.s0, market.rho
    k = math.log(K / s0)
    x = k - rho
    region = str(classify_region(market, K))
    if abs(x) < ATM_SERIES_WINDOW:
        level = atm_vol_rho(model, market)
        vol = level * (1.0 + atm_skew_rho(model, market) * x)
        return SmilePoint(K=K, x=x, vol=vol, source="asymptotic_rho", region=region)
    res = rate_function(model, market, K)
    if not res.I > 0:
        raise NumericError("non-positive rate function away from the forward", K=K, I=res.I)
    vol = abs(x) / math.sqrt(2.0 * res.I)
    return SmilePoint(K=K, x=x, vol=vol, source="asymptotic_rho", region=region)


def sigma1_rho_coefficient(model: VolatilityModel, market: Market, K: float) -> float:
    """Coefficient of ``rho`` in the small-carry expansion of the asymptotic implied vol."""
    s0 = market.s0
    k = math.log(K / s0)
    if k == 0.0:
        raise DomainError("coefficient needs K != s0")
    sig0 = bbf_vol(model, market, K).vol
    inv_var = integrate_oriented(lambda z: float(model.sigma(s0 * math.exp(z))) ** -2, 0.0, k)
    return sig0**3 / (k * k) * (inv_var - k / sig0**2)


def sigma1_from_expansion(model: VolatilityModel, market: Market, K: float) -> float:
    """Same coefficient assembled from the rate-function coefficients ``(I0, I1)``."""
    k = math.log(K / market.s0)
    I0, I1 = rate_expansion_small_rho(model, market, K)
    sig0 = abs(k) / math.sqrt(2.0 * I0)
    return -(k * k * I1 / (2.0 * I0 * I0) + k / I0) / (2.0 * sig0)


def smile_curve(model: VolatilityModel, market: Market, k_grid, include_bbf: bool = False):
    """Asymptotic smile on a strictly increasing log-strike grid.

    Failures at individual strikes are returned as points with ``vol = nan``
    and the error message attached instead of aborting the curve.  With
    ``include_bbf`` each entry is a pair ``(asymptotic, bbf)``.
    """
    ks = [float(k) for k in k_grid]
    if any(not math.isfinite(v) for v in ks):
        raise DomainError("grid must be finite")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise DomainError("grid must be strictly increasing")
    out = []
    for k in ks:
        K = market.strike(k)
        try:
            pt = implied_vol_asymptotic(model, market, K)
        except ShortVolError as exc:
            log.warning("asymptotic vol failed at k=%g: %s", k, exc)
            pt = SmilePoint(K=K, x=k - market.rho, vol=math.nan, source="asymptotic_rho", error=str(exc))
        if include_bbf:
            try:
                bb = bbf_vol(model, market, K)
            except ShortVolError as exc:
                bb = SmilePoint(K=K, x=k - market.rho, vol=math.nan, source="bbf", error=str(exc))
            out.append((pt, bb))
        else:
            out.append(pt)
    return out
