"""Independent pricing oracles: Black-Scholes, exact CEV, Monte Carlo.

These never touch the rate-function machinery, so they can be used to check
the asymptotics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, NumericError
from .model import CevSpec, Market, VolatilityModel

log = logging.getLogger(__name__)

IV_LOW, IV_HIGH = 1e-8, 5.0
NCX2_TAIL = 1e-13
MC_CHUNK = 50_000


@dataclass(frozen=True)
class PriceResult:
    price: float
    stderr: float | None = None
    method: str = "bs"
    warnings: tuple = field(default_factory=tuple)


def _kind(kind):
    kind = kind.lower()
    if kind not in ("call", "put"):
        raise DomainError(f"option kind must be 'call' or 'put', got {kind!r}")
    return kind


def otm_kind(market: Market, K: float) -> str:
    return "call" if K >= market.forward else "put"


# Black-Scholes --------------------------------------------------------------


def _bs_terms(market, K, vol):
    T = market.T
    sq = vol * math.sqrt(T)
    d1 = (math.log(market.forward / K) + 0.5 * sq * sq) / sq
    return d1, d1 - sq, sq


def _bs_log_price(market, K, vol, kind):
    """Log of the discounted price; both legs combined in log space."""
    F, T = market.forward, market.T
    d1, d2, _ = _bs_terms(market, K, vol)
    if kind == "call":
        a = math.log(F) + special.log_ndtr(d1)
        b = math.log(K) + special.log_ndtr(d2)
    else:
        a = math.log(K) + special.log_ndtr(-d2)
        b = math.log(F) + special.log_ndtr(-d1)
    if not b < a:
        return -math.inf
    return -market.r * T + a + math.log(-math.expm1(b - a))


def bs_price(market: Market, K: float, vol: float, kind: str = "call") -> PriceResult:
    kind = _kind(kind)
    if not (vol > 0 and K > 0):
        raise DomainError("need vol > 0 and K > 0")
    return PriceResult(price=math.exp(_bs_log_price(market, K, vol, kind)), method="bs")


def _no_arb_bounds(market, K, kind):
    df_q = math.exp(-market.q * market.T)
    df_r = math.exp(-market.r * market.T)
    if kind == "call":
        return max(0.0, market.s0 * df_q - K * df_r), market.s0 * df_q
    return max(0.0, K * df_r - market.s0 * df_q), K * df_r


def bs_implied_vol(market: Market, K: float, price: float, kind: str = "call", tol: float = 1e-13) -> float:
    """Black-Scholes implied volatility by Newton on the log price, bisection as fallback."""
    kind = _kind(kind)
    lower, upper = _no_arb_bounds(market, K, kind)
    if not price > lower:
        raise DomainError(f"price {price!r} at or below the no-arbitrage lower bound {lower!r}")
    if not price < upper:
        raise DomainError(f"price {price!r} at or above the no-arbitrage upper bound {upper!r}")
    target = math.log(price)
    sqT = math.sqrt(market.T)

    def f(v):
        return _bs_log_price(market, K, v, kind) - target

    lo, hi = IV_LOW, IV_HIGH
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > 0 or f_hi < 0:
        raise DomainError("implied vol outside [1e-8, 5]", f_lo=f_lo, f_hi=f_hi)

    x = abs(math.log(market.forward / K))
    v = min(max(math.sqrt(2.0 * x / market.T) if x > 0 else 0.2, 0.01), 2.0)
    for _ in range(200):
        fv = f(v)
        if abs(fv) < tol:
            return v
        if fv < 0:
            lo = v
        else:
            hi = v
        d1 = _bs_terms(market, K, v)[0]
        # vega / price, computed in log space
        log_vega = -market.q * market.T + math.log(market.s0) - 0.5 * d1 * d1 - 0.5 * math.log(2 * math.pi) + math.log(sqT)
        slope = math.exp(log_vega - (fv + target)) if math.isfinite(fv) else 0.0
        step_ok = slope > 0 and math.isfinite(slope)
        v_new = v - fv / slope if step_ok else None
        if v_new is None or not (lo < v_new < hi):
            v_new = 0.5 * (lo + hi)
        if hi - lo < 1e-15 * hi:
            return v_new
        v = v_new
    raise NumericError("implied vol iteration did not converge", v=v, lo=lo, hi=hi)


# Noncentral chi-square --------------------------------------------------------


def _ncx2_series(x, k, lam, upper):
    if not (x >= 0 and k > 0 and lam >= 0):
        raise DomainError("need x >= 0, k > 0, lam >= 0")
    if x == 0:
        return 1.0 if upper else 0.0
    if math.isinf(x):
        return 0.0 if upper else 1.0
    gam = special.gammaincc if upper else special.gammainc
    a, y = 0.5 * k, 0.5 * x
    m = 0.5 * lam
    if m == 0:
        # lam == 0, or so subnormal that halving it underflows
        return float(gam(a, y))
    j0 = int(math.floor(m))
    block = int(10 * math.sqrt(m) + 50)

    def terms(js):
        log_w = -m + js * math.log(m) - special.gammaln(js + 1.0)
        return np.exp(log_w) * gam(a + js, y), np.exp(log_w)

    total = 0.0
    # upward from the mode; gamma factor monotone in j bounds the tail
    j = j0
    while True:
        js = np.arange(j, j + block, dtype=float)
        t, w = terms(js)
        total += float(np.sum(t))
        j_last = j + block - 1
        q = m / (j_last + 1.0)
        if q < 1.0:
            tail_w = float(w[-1]) * q / (1.0 - q)
            tail = tail_w if upper else min(tail_w, float(t[-1]) * q / (1.0 - q))
            if tail <= NCX2_TAIL * total or tail == 0.0:
                break
        j += block
    # downward from the mode
    j = j0 - 1
    while j >= 0:
        js = np.arange(max(j - block + 1, 0), j + 1, dtype=float)
        t, w = terms(js)
        total += float(np.sum(t))
        j_first = int(js[0])
        if j_first == 0:
            break
        q = (j_first - 1.0) / m
        tail_w = float(w[0]) * q / (1.0 - q) if q < 1.0 else math.inf
        q_t = j_first / m
        tail_t = float(t[0]) * q_t / (1.0 - q_t) if upper and q_t < 1.0 else math.inf
        if min(tail_w, tail_t) <= NCX2_TAIL * total:
            break
        j = j_first - 1
    return min(max(total, 0.0), 1.0)


def noncentral_chi2_cdf(x: float, k: float, lam: float) -> float:
    """P(X <= x) for X noncentral chi-square with ``k`` degrees of freedom.

    Poisson(lam/2)-weighted series of regularized lower incomplete gamma
    terms, summed outwards from the modal Poisson index until a geometric
    bound on the remaining tail falls below ``1e-13`` of the partial sum.
    Small values are therefore returned with relative, not just absolute,
    accuracy.
    """
    return _ncx2_series(x, k, lam, upper=False)


def noncentral_chi2_sf(x: float, k: float, lam: float) -> float:
    """Survival function ``P(X > x)`` by the same series with upper gamma terms."""
    return _ncx2_series(x, k, lam, upper=True)


def noncentral_chi2_pdf(x, k, lam):
    """Density via the modified Bessel function, exponentially scaled for stability."""
    x = np.asarray(x, dtype=float)
    if lam == 0:
        return np.exp((0.5 * k - 1) * np.log(x) - 0.5 * x - special.gammaln(0.5 * k) - 0.5 * k * math.log(2))
    z = np.sqrt(lam * x)
    return 0.5 * np.exp(-0.5 * (np.sqrt(x) - math.sqrt(lam)) ** 2) * (x / lam) ** (0.25 * k - 0.5) * special.ive(0.5 * k - 1, z)


# Exact CEV --------------------------------------------------------------------


def cev_exact_price(spec: CevSpec, market: Market, K: float, kind: str = "call") -> PriceResult:
    """Exact European price in the CEV model absorbed at zero.

    The carry is removed by ``S_t = x_t e^{(r-q)t}`` and the deterministic
    clock ``tau = (1 - e^{-2|beta|(r-q)T}) / (2|beta|(r-q))``, which turns
    ``x`` into a driftless CEV process.  Its transition law is a noncentral
    chi-square in ``x^{2|beta|}``.
    """
    kind = _kind(kind)
    if not K > 0:
        raise DomainError("strike must be positive")
    b, s = spec.abs_beta, spec.sigma0
    mu, T = market.r - market.q, market.T
    tau = T if mu == 0 else -math.expm1(-2.0 * b * mu * T) / (2.0 * b * mu)
    K_fwd = K * math.exp(-mu * T)
    x0 = market.s0
    scale = 1.0 / (b * b * s * s * tau)
    X = x0 ** (2 * b) * scale
    Y = K_fwd ** (2 * b) * scale
    dq = math.exp(-market.q * T)
    if kind == "call":
        a_term = x0 * noncentral_chi2_sf(Y, 2.0 + 1.0 / b, X)
        b_term = K_fwd * noncentral_chi2_cdf(X, 1.0 / b, Y)
    else:
        a_term = K_fwd * noncentral_chi2_sf(X, 1.0 / b, Y)
        b_term = x0 * noncentral_chi2_cdf(Y, 2.0 + 1.0 / b, X)
    price = dq * (a_term - b_term)
    warnings = ()
    if not price > 0:
        warnings = ("price underflows to zero in double precision",)
    elif price < 1e-9 * a_term:
        warnings = (f"price {price:.3e} is a difference of terms of size {a_term:.3e}; relative accuracy reduced",)
    return PriceResult(price=max(price, 0.0), method="cev_exact", warnings=warnings)


# Monte Carlo ------------------------------------------------------------------


def _shift_schedule(path, market, model, n_steps):
    """Drift of the driving Brownian motion that makes the optimal path typical."""
    T, dt = market.T, market.T / n_steps
    tau = (np.arange(n_steps) + 0.5) / n_steps
    g = np.interp(tau, path.t, path.g)
    dg = np.interp(tau, path.t, path.dg)
    theta = (dg - market.rho) / (T * model.sigma(market.s0 * np.exp(g)))
    return theta * math.sqrt(dt)


def mc_price(
    model: VolatilityModel,
    market: Market,
    K: float,
    kind: str = "call",
    n_paths: int = 200_000,
    n_steps: int | None = None,
    seed: int = 0,
    antithetic: bool = True,
    shift_path=None,
) -> PriceResult:
    """Euler Monte Carlo price with absorption at zero.

    Paths are generated in fixed-size chunks, each with its own child of
    ``SeedSequence(seed)`` driving a Philox generator, so results depend only
    on the seed.  ``shift_path`` (a :class:`PathSample`) switches on
    importance sampling: the Gaussian increments are drifted so that the
    log-price follows that path on average, and the payoff carries the
    likelihood ratio.  This is what makes deep out-of-the-money prices at
    short maturity measurable.
    """
    kind = _kind(kind)
    if n_paths < 1:
        raise DomainError("n_paths must be at least 1")
    if n_steps is None:
        n_steps = max(100, int(math.ceil(100 * market.T)))
    if n_steps < 1:
        raise DomainError("n_steps must be at least 1")
    T, mu = market.T, market.r - market.q
    dt = T / n_steps
    sqdt = math.sqrt(dt)
    shift = _shift_schedule(shift_path, market, model, n_steps) if shift_path is not None else None

    n_base = (n_paths + 1) // 2 if antithetic else n_paths
    n_chunks = max(1, -(-n_base // MC_CHUNK))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    log_terms = []
    for c, child in enumerate(children):
        n = min(MC_CHUNK, n_base - c * MC_CHUNK)
        rng = np.random.Generator(np.random.Philox(child))
        signs = (1.0, -1.0) if antithetic else (1.0,)
        Z = rng.standard_normal((n_steps, n))
        per_sign = []
        for sgn in signs:
            S = np.full(n, market.s0)
            log_lr = np.zeros(n)
            for i in range(n_steps):
                z = sgn * Z[i]
                if shift is not None:
                    th = shift[i]
                    log_lr -= th * z + 0.5 * th * th
                    z = z + th
                alive = S > 0
                S_safe = np.where(alive, S, 1.0)
                S = np.where(alive, S + mu * S * dt + model.sigma(S_safe) * S * sqdt * z, 0.0)
                S = np.maximum(S, 0.0)
            payoff = np.maximum(S - K, 0.0) if kind == "call" else np.maximum(K - S, 0.0)
            with np.errstate(divide="ignore"):
                per_sign.append(np.log(payoff) + log_lr)
        if antithetic:
            # pair average, in log space
            log_terms.append(np.logaddexp(per_sign[0], per_sign[1]) - math.log(2.0))
        else:
            log_terms.append(per_sign[0])
    lt = np.concatenate(log_terms)
    n_eff = lt.size
    peak = float(np.max(lt))
    disc = math.exp(-market.r * T)
    if not math.isfinite(peak):
        return PriceResult(price=0.0, stderr=0.0, method="mc", warnings=("all paths finished out of the money",))
    scaled = np.exp(lt - peak)
    mean = float(np.mean(scaled))
    var = float(np.var(scaled, ddof=1)) if n_eff > 1 else 0.0
    price = disc * math.exp(peak) * mean
    stderr = disc * math.exp(peak) * math.sqrt(var / n_eff)
    return PriceResult(price=price, stderr=stderr, method="mc")


@dataclass(frozen=True)
class LimitRow:
    T: float
    t_log_price: float
    target: float
    usable: bool
    stderr_rel: float | None = None


def ld_limit_check(model, market_family, K, target, n_paths=200_000, seed=0, shift_paths=None, n_steps=None):
    """Tabulate ``T ln(undiscounted OTM price)`` along a family of maturities.

    ``market_family`` is an iterable of markets with decreasing ``T`` and a
    common carry; ``target`` is ``-I`` for that carry.  ``shift_paths`` may
    map each market to a path used for importance sampling.
    """
    rows = []
    for i, mk in enumerate(market_family):
        kind = otm_kind(mk, K)
        path = shift_paths[i] if shift_paths is not None else None
        res = mc_price(model, mk, K, kind, n_paths=n_paths, n_steps=n_steps, seed=seed + i, shift_path=path)
        if res.price <= 0:
            rows.append(LimitRow(mk.T, math.nan, target, False))
            continue
        undiscounted = res.price * math.exp(mk.r * mk.T)
        rows.append(LimitRow(mk.T, mk.T * math.log(undiscounted), target, True, res.stderr / res.price))
    return rows
