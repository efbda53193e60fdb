"""Volatility models, market parameters and the trajectory-region classification.

The asset follows ``dS/S = sigma(S) dW + (r - q) dt``.  Everything in the
package works with the carry ``rho = (r - q) T`` held fixed as ``T -> 0``,
with log-strike ``k = ln(K/s0)`` and log-moneyness ``x = k - rho``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

ATM_TOL = 1e-12


class Region(enum.Enum):
    """Which family of optimal trajectories ends at a given strike."""

    REGION1 = "region1"  # g(t) >= |rho| t, OTM calls
    REGION2 = "region2"  # g(t) <= -|rho| t, OTM puts
    REGION3 = "region3"  # strictly inside the cone |g(t)| < |rho| t
    ATM = "atm"  # K equals the forward s0 e^rho

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class VolatilityModel:
    """A local volatility function ``sigma(S)`` together with its derivative.

    ``sigma`` and ``dsigma`` must accept numpy arrays as well as floats; the
    Monte Carlo pricer evaluates them on whole path slices.
    """

    sigma: Callable
    dsigma: Callable
    lower_bound: float = 0.0
    upper_bound: float = math.inf
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("constant", "cev", "custom"):
            raise DomainError(f"unknown model kind {self.kind!r}")
        if not (0.0 <= self.lower_bound <= self.upper_bound):
            raise DomainError("need 0 <= lower_bound <= upper_bound")

    def variance(self, S):
        return self.sigma(S) ** 2


@dataclass(frozen=True)
class CevSpec:
    """CEV parameters for ``sigma(S) = sigma0 * S**beta`` with -1/2 <= beta < 0."""

    sigma0: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0):
            raise DomainError(f"sigma0 must be positive, got {self.sigma0}")
        if not (-0.5 <= self.beta < 0.0):
            raise DomainError(f"beta must lie in [-1/2, 0), got {self.beta}")

    @property
    def abs_beta(self) -> float:
        return -self.beta


@dataclass(frozen=True)
class Market:
    s0: float
    r: float
    q: float
    T: float

    def __post_init__(self):
        for name in ("s0", "r", "q", "T"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"market field {name} is not finite")
        if self.s0 <= 0:
            raise DomainError("s0 must be positive")
        if self.T <= 0:
            raise DomainError("T must be positive")

    @classmethod
    def from_rho(cls, s0: float, rho: float, T: float = 1.0, q: float = 0.0) -> "Market":
        """Market whose carry ``(r - q) T`` equals ``rho`` exactly."""
        return cls(s0=s0, r=q + rho / T, q=q, T=T)

    @property
    def rho(self) -> float:
        return (self.r - self.q) * self.T

    @property
    def forward(self) -> float:
        return self.s0 * math.exp(self.rho)

    def log_strike(self, K):
        return np.log(np.asarray(K, dtype=float) / self.s0) if np.ndim(K) else math.log(K / self.s0)

    def log_moneyness(self, K):
        return self.log_strike(K) - self.rho

    def strike(self, k: float) -> float:
        """Strike with log-strike ``k``."""
        return self.s0 * math.exp(k)


def constant_model(sigma: float) -> VolatilityModel:
    if not sigma > 0:
        raise DomainError("constant volatility must be positive")

    def level(S):
        return sigma if np.ndim(S) == 0 else np.full(np.shape(S), sigma)

    def slope(S):
        return 0.0 if np.ndim(S) == 0 else np.zeros(np.shape(S))

    return VolatilityModel(
        sigma=level,
        dsigma=slope,
        lower_bound=sigma,
        upper_bound=sigma,
        kind="constant",
        params={"sigma": sigma},
    )


def make_cev_model(spec: CevSpec) -> VolatilityModel:
    s, b = spec.sigma0, spec.beta
    return VolatilityModel(
        sigma=lambda S: s * np.power(S, b),
        dsigma=lambda S: s * b * np.power(S, b - 1.0),
        lower_bound=0.0,
        upper_bound=math.inf,
        kind="cev",
        params={"sigma0": s, "beta": b},
    )


def classify_region(market: Market, K: float, atm_tol: float = ATM_TOL) -> Region:
    if not math.isfinite(K) or K <= 0:
        raise DomainError(f"strike must be positive and finite, got {K}")
    k = math.log(K / market.s0)
    rho = market.rho
    if abs(k - rho) < atm_tol:
        return Region.ATM
    if k >= abs(rho):
        return Region.REGION1
    if k <= -abs(rho):
        return Region.REGION2
    return Region.REGION3
