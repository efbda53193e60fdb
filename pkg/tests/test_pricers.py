import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from shortvol import (
    CevSpec,
    DomainError,
    Market,
    bs_implied_vol,
    bs_price,
    cev_atm_vol,
    cev_exact_price,
    cev_rate_closed,
    constant_model,
    ld_limit_check,
    make_cev_model,
    mc_price,
    noncentral_chi2_cdf,
    noncentral_chi2_sf,
    optimal_path,
)
from shortvol.pricers import noncentral_chi2_pdf, otm_kind
from shortvol.validation import ncx2_cdf_quadrature

SPEC = CevSpec(0.14, -0.5)
FIG = Market(2.0, 0.1, 0.0, 1.0)


# Black-Scholes


def test_bs_tiny_vol_atm_forward_goes_to_zero():
    m = Market(1.0, 0.05, 0.01, 1.0)
    assert bs_price(m, m.forward, 1e-8).price < 1e-8


def test_bs_tiny_vol_intrinsic():
    m = Market(1.0, 0.05, 0.01, 2.0)
    K = 0.6
    intrinsic = math.exp(-0.02) - K * math.exp(-0.1)
    assert bs_price(m, K, 1e-6).price == pytest.approx(intrinsic, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    vol=st.floats(0.05, 1.5),
    k=st.floats(-1.0, 1.0),
    T=st.floats(0.05, 5.0),
    r=st.floats(-0.05, 0.1),
)
def test_bs_parity(vol, k, T, r):
    m = Market(1.5, r, 0.02, T)
    K = 1.5 * math.exp(k)
    c = bs_price(m, K, vol, "call").price
    p = bs_price(m, K, vol, "put").price
    fwd = 1.5 * math.exp(-0.02 * T) - K * math.exp(-r * T)
    assert c - p == pytest.approx(fwd, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(vol=st.floats(0.02, 2.0), k=st.floats(-0.8, 0.8), T=st.floats(0.05, 5.0))
def test_bs_roundtrip(vol, k, T):
    m = Market(1.0, 0.03, 0.0, T)
    K = m.forward * math.exp(k)
    kind = otm_kind(m, K)
    price = bs_price(m, K, vol, kind).price
    if price < 1e-250:
        return
    assert bs_implied_vol(m, K, price, kind) == pytest.approx(vol, rel=1e-10)


def test_bs_roundtrip_example():
    m = Market(1.0, 0.02, 0.0, 1.0)
    price = bs_price(m, 1.1, 0.2).price
    assert abs(bs_implied_vol(m, 1.1, price) - 0.2) <= 1e-10


def test_implied_vol_monotone_near_lower_bound():
    m = Market(1.0, 0.0, 0.0, 1.0)
    prices = [1e-12, 1e-9, 1e-6, 1e-3]
    vols = [bs_implied_vol(m, 1.2, p) for p in prices]
    assert all(a < b for a, b in zip(vols, vols[1:]))
    assert vols[0] < 0.1


def test_implied_vol_bounds_named():
    m = Market(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(DomainError, match="lower bound"):
        bs_implied_vol(m, 0.8, 0.1)
    with pytest.raises(DomainError, match="upper bound"):
        bs_implied_vol(m, 0.8, 1.0)
    with pytest.raises(DomainError):
        bs_price(m, 1.0, 0.2, "straddle")


# Noncentral chi-square


@pytest.mark.parametrize("x,k", [(0.5, 1.0), (3.0, 2.0), (12.0, 7.5)])
def test_ncx2_central_case(x, k):
    assert noncentral_chi2_cdf(x, k, 0.0) == pytest.approx(special.gammainc(0.5 * k, 0.5 * x), rel=1e-14)


def test_ncx2_limits():
    assert noncentral_chi2_cdf(0.0, 3.0, 2.0) == 0.0
    assert noncentral_chi2_cdf(1e4, 3.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert noncentral_chi2_sf(0.0, 3.0, 2.0) == 1.0


def test_ncx2_against_density_quadrature():
    assert noncentral_chi2_cdf(4.0, 2.0, 1.0) == pytest.approx(ncx2_cdf_quadrature(4.0, 2.0, 1.0), abs=1e-12)


@pytest.mark.parametrize("x,k,lam", [(4.0, 2.0, 1.0), (50.0, 3.0, 40.0), (1e3, 4.0, 900.0), (2.0, 0.5, 0.3)])
def test_ncx2_matches_scipy(x, k, lam):
    assert noncentral_chi2_cdf(x, k, lam) == pytest.approx(stats.ncx2.cdf(x, k, lam), rel=1e-11, abs=1e-14)
    assert noncentral_chi2_sf(x, k, lam) == pytest.approx(stats.ncx2.sf(x, k, lam), rel=1e-11, abs=1e-14)


def test_ncx2_pdf_matches_scipy():
    x = np.array([0.3, 2.0, 9.0])
    np.testing.assert_allclose(noncentral_chi2_pdf(x, 3.0, 2.5), stats.ncx2.pdf(x, 3.0, 2.5), rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    x=st.floats(0.01, 60.0),
    dx=st.floats(0.01, 5.0),
    k=st.floats(0.2, 10.0),
    lam=st.floats(0.0, 40.0),
    dlam=st.floats(0.1, 5.0),
)
def test_ncx2_monotone(x, dx, k, lam, dlam):
    F = noncentral_chi2_cdf(x, k, lam)
    assert 0.0 <= F <= 1.0
    assert noncentral_chi2_cdf(x + dx, k, lam) >= F - 1e-15
    assert noncentral_chi2_cdf(x, k, lam + dlam) <= F + 1e-15


# Exact CEV


def test_cev_small_vol_approaches_black_scholes():
    spec = CevSpec(0.01, -0.5)
    m = Market(2.0, 0.0, 0.0, 1.0)
    price = cev_exact_price(spec, m, 2.0, "call").price
    iv = bs_implied_vol(m, 2.0, price, "call")
    assert iv == pytest.approx(0.01 / math.sqrt(2.0), rel=1e-3)


@pytest.mark.parametrize("r", [0.1, -0.1])
def test_cev_small_vol_atm_ratio(r):
    spec = CevSpec(0.02, -0.5)
    m = Market(2.0, r, 0.0, 1.0)
    price = cev_exact_price(spec, m, m.forward, "call").price
    iv = bs_implied_vol(m, m.forward, price, "call")
    assert iv / cev_atm_vol(spec, m) == pytest.approx(1.0, abs=5e-3)


@pytest.mark.parametrize("K", [1.5, 2.0, 2.5, 3.5])
def test_cev_parity(K):
    c = cev_exact_price(SPEC, FIG, K, "call").price
    p = cev_exact_price(SPEC, FIG, K, "put").price
    assert c - p == pytest.approx(2.0 - K * math.exp(-0.1), abs=1e-12)


def test_cev_call_decreasing_convex_in_strike():
    Ks = np.linspace(1.2, 4.0, 15)
    c = np.array([cev_exact_price(SPEC, FIG, K, "call").price for K in Ks])
    assert np.all(np.diff(c) < 0)
    assert np.all(np.diff(c, 2) > -1e-14)


def test_cev_deep_otm_put_resolved():
    res = cev_exact_price(CevSpec(0.1, -0.5), Market(2.0, 0.0, 0.0, 0.1), 1.4, "put")
    assert 0.0 < res.price < 1e-40
    assert not res.warnings


def test_cev_underflow_warning():
    res = cev_exact_price(CevSpec(0.05, -0.5), Market(2.0, 0.0, 0.0, 0.05), 3.5, "call")
    assert res.price == 0.0
    assert res.warnings


# Monte Carlo


def test_mc_constant_vol_matches_bs():
    m = Market(1.0, 0.03, 0.0, 0.5)
    res = mc_price(constant_model(0.25), m, 1.05, "call", n_paths=40_000, n_steps=50, seed=3)
    bs = bs_price(m, 1.05, 0.25).price
    assert abs(res.price - bs) <= 3 * res.stderr


def test_mc_zero_vol_is_discounted_forward_intrinsic():
    m = Market(1.0, 0.05, 0.0, 1.0)
    res = mc_price(constant_model(1e-10), m, 0.9, "call", n_paths=1000, n_steps=20, seed=1)
    # Euler compounds the drift step by step
    S_T = (1.0 + 0.05 / 20) ** 20
    assert res.price == pytest.approx(math.exp(-0.05) * (S_T - 0.9), rel=1e-8)


@pytest.mark.parametrize("K", [1.9, 2.2])
def test_mc_cev_matches_exact(K):
    kind = otm_kind(FIG, K)
    res = mc_price(make_cev_model(SPEC), FIG, K, kind, n_paths=40_000, seed=5)
    exact = cev_exact_price(SPEC, FIG, K, kind).price
    assert abs(res.price - exact) <= 3 * res.stderr


def test_mc_atm_implied_vol_within_stderr():
    K = FIG.forward
    res = mc_price(make_cev_model(SPEC), FIG, K, "call", n_paths=40_000, seed=9)
    exact_iv = bs_implied_vol(FIG, K, cev_exact_price(SPEC, FIG, K).price)
    mc_iv = bs_implied_vol(FIG, K, res.price)
    vega = (bs_price(FIG, K, mc_iv + 1e-5).price - bs_price(FIG, K, mc_iv - 1e-5).price) / 2e-5
    assert abs(mc_iv - exact_iv) <= 3 * res.stderr / vega


def test_mc_reproducible():
    a = mc_price(constant_model(0.2), Market(1.0, 0.0, 0.0, 0.1), 1.02, n_paths=5000, n_steps=10, seed=42)
    b = mc_price(constant_model(0.2), Market(1.0, 0.0, 0.0, 0.1), 1.02, n_paths=5000, n_steps=10, seed=42)
    assert a == b


def test_mc_all_paths_out_of_money():
    res = mc_price(constant_model(1e-6), Market(1.0, 0.0, 0.0, 0.01), 2.0, n_paths=100, n_steps=5, seed=0)
    assert res.price == 0.0 and res.warnings


def test_mc_argument_checks():
    with pytest.raises(DomainError):
        mc_price(constant_model(0.2), FIG, 2.0, n_paths=0)


# Large-deviation tabulation


def test_ld_rows_trend_constant():
    sigma, rho, k = 0.2, 0.1, 0.4
    K = math.exp(k)
    family = [Market.from_rho(1.0, rho, T) for T in (0.2, 0.05)]
    target = -((k - rho) ** 2) / (2 * sigma**2)
    model = constant_model(sigma)
    paths = [optimal_path(model, m, K, n_samples=101) for m in family]
    rows = ld_limit_check(model, family, K, target, n_paths=20_000, n_steps=50, seed=2, shift_paths=paths)
    assert all(r.usable for r in rows)
    gaps = [abs(r.t_log_price - target) for r in rows]
    assert gaps[1] < gaps[0]


def test_ld_rows_at_forward_target_zero():
    rho = 0.1
    family = [Market.from_rho(1.0, rho, T) for T in (0.1, 0.02)]
    rows = ld_limit_check(constant_model(0.2), family, math.exp(rho), 0.0, n_paths=5000, n_steps=20, seed=1)
    assert abs(rows[1].t_log_price) < abs(rows[0].t_log_price)


def test_ld_unusable_when_all_paths_miss():
    family = [Market.from_rho(1.0, 0.0, 0.01)]
    rows = ld_limit_check(constant_model(0.01), family, 3.0, -1.0, n_paths=100, n_steps=5)
    assert not rows[0].usable and math.isnan(rows[0].t_log_price)


def test_cev_ld_target_closed_form():
    m = Market.from_rho(2.0, 0.1, 1.0)
    assert cev_rate_closed(SPEC, m, 2.0 * math.exp(0.5)).I > 0
