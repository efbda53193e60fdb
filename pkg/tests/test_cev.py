import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shortvol import (
    CevSpec,
    DomainError,
    Market,
    Region,
    cev_atm_skew,
    cev_atm_vol,
    cev_bbf_vol,
    cev_optimal_path,
    cev_rate_closed,
    make_cev_model,
    novikov_horizon,
    rate_function,
    rate_function_rho0,
)
from shortvol.cev import y0_monotone, y0_region3

SPEC = CevSpec(0.14, -0.5)
S0 = 2.0


def mk(rho):
    return Market.from_rho(S0, rho)


@pytest.mark.parametrize("rho", [0.1, -0.1, 1.0])
def test_forward_strike_has_zero_rate(rho):
    market = mk(rho)
    res = cev_rate_closed(SPEC, market, market.forward)
    assert res.I == 0.0
    assert res.region == Region.ATM


def test_region3_slope_hits_boundary_at_forward():
    rho = 0.1
    assert y0_region3(SPEC, mk(rho), S0 * math.exp(rho)) == pytest.approx(rho, rel=1e-14)
    assert y0_region3(SPEC, mk(rho), S0 * math.exp(-rho)) == pytest.approx(-rho, rel=1e-14)


def test_monotone_slope_at_boundary():
    # at k = |rho| the region 1 solution degenerates to g' = rho
    rho = 0.3
    assert y0_monotone(SPEC, mk(rho), S0 * math.exp(rho)) == pytest.approx(rho, rel=1e-13)


def test_closed_form_matches_generic_point():
    market = mk(0.1)
    K = S0 * math.exp(0.5)
    closed = cev_rate_closed(SPEC, market, K)
    generic = rate_function(make_cev_model(SPEC), market, K)
    assert closed.I == pytest.approx(generic.I, rel=1e-6)
    assert closed.branch == "up"


@pytest.mark.parametrize("k", [-0.8, -0.05, 0.04, 0.6])
def test_small_carry_limit(k):
    K = S0 * math.exp(k)
    zero = rate_function_rho0(make_cev_model(SPEC), mk(0.0), K).I
    near = cev_rate_closed(SPEC, mk(1e-6), K).I
    assert near == pytest.approx(zero, rel=1e-4)


def test_zero_carry_value_has_square():
    # (K^b - s0^b)^2 / (2 b^2 sigma^2)
    K = 3.0
    b, s = SPEC.abs_beta, SPEC.sigma0
    expected = (K**b - S0**b) ** 2 / (2 * b * b * s * s)
    assert cev_rate_closed(SPEC, mk(0.0), K).I == pytest.approx(expected, rel=1e-14)


def test_atm_path_linear():
    market = mk(0.2)
    p = cev_optimal_path(SPEC, market, market.forward, n_samples=11)
    np.testing.assert_allclose(p.g, 0.2 * p.t, rtol=0, atol=1e-15)


@pytest.mark.parametrize("k", np.arange(-1.5, 1.51, 0.25).round(2).tolist())
def test_path_families_stay_in_their_region(k):
    rho = 1.0
    market = mk(rho)
    K = S0 * math.exp(k)
    p = cev_optimal_path(SPEC, market, K, n_samples=201)
    region = Region.REGION1 if k >= rho else Region.REGION2 if k <= -rho else Region.REGION3
    assert p.g[0] == 0.0 and p.g[-1] == pytest.approx(k, abs=1e-12)
    tol = 1e-12
    if region == Region.REGION1:
        assert np.all(p.g >= rho * p.t - tol)
        assert np.all(p.dg >= rho - 1e-12)
    elif region == Region.REGION2:
        assert np.all(p.g <= -rho * p.t + tol)
        assert np.all(p.dg <= -rho + 1e-12)
    else:
        assert np.all(np.abs(p.g) <= rho * p.t + tol)
        assert np.all(np.abs(p.dg) < rho)


def test_dip_path_turns_once():
    market = mk(1.0)
    res = cev_rate_closed(SPEC, market, S0 * math.exp(0.1))
    assert res.branch == "dip" and not res.monotone
    p = cev_optimal_path(SPEC, market, S0 * math.exp(0.1), n_samples=2001)
    assert p.t_star is not None
    assert p.g.min() == pytest.approx(res.g_star, abs=1e-6)
    assert np.count_nonzero(np.diff(np.sign(p.dg))) == 1


def test_boundary_argument_raises():
    from shortvol.cev import _artanh

    with pytest.raises(DomainError):
        _artanh(1.0)


def test_atm_vol_example():
    v = cev_atm_vol(SPEC, mk(0.1))
    expected = 0.14 / math.sqrt(2.0) * math.sqrt(-math.expm1(-0.1) / 0.1)
    assert v == pytest.approx(expected, rel=1e-14)
    assert v == pytest.approx(0.09657, abs=5e-6)


def test_atm_vol_zero_carry():
    assert cev_atm_vol(SPEC, mk(0.0)) == pytest.approx(0.14 / math.sqrt(2.0), rel=1e-15)
    assert cev_atm_vol(SPEC, mk(1e-9)) == pytest.approx(0.098995, abs=5e-7)


def test_atm_skew_is_half_beta():
    assert cev_atm_skew(SPEC) == -0.25
    assert cev_atm_skew(CevSpec(0.2, -0.3)) == pytest.approx(-0.15, rel=1e-15)


def test_bbf_vol_values():
    k = 0.5
    K = S0 * math.exp(k)
    expected = 0.14 * 0.5 * k / (K**0.5 - S0**0.5)
    assert cev_bbf_vol(SPEC, mk(0.1), K) == pytest.approx(expected, rel=1e-15)
    assert cev_bbf_vol(SPEC, mk(0.1), S0) == pytest.approx(0.14 / math.sqrt(2.0), rel=1e-15)
    # continuous through K = s0
    assert cev_bbf_vol(SPEC, mk(0.1), S0 * math.exp(1e-9)) == pytest.approx(0.14 / math.sqrt(2.0), rel=1e-8)


def test_novikov_horizons():
    assert novikov_horizon(CevSpec(0.14, -0.5), 0.1) == 20.0
    assert novikov_horizon(CevSpec(0.14, -0.2), 0.1) == math.inf
    assert novikov_horizon(CevSpec(0.14, -0.1), 0.1) == pytest.approx(-50.0 * math.log(1 - 0.2 * math.pi), rel=1e-15)
    assert novikov_horizon(CevSpec(0.14, -0.5), -0.1) == math.inf


@pytest.mark.parametrize("rho", [0.1, -0.1, 0.5])
def test_continuity_across_region_edges(rho):
    market = mk(rho)
    for edge in (abs(rho), -abs(rho)):
        if abs(edge - rho) < 1e-14:
            continue
        lo = cev_rate_closed(SPEC, market, S0 * math.exp(edge - 1e-9)).I
        hi = cev_rate_closed(SPEC, market, S0 * math.exp(edge + 1e-9)).I
        assert lo == pytest.approx(hi, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    beta=st.floats(-0.5, -0.05),
    rho=st.floats(0.01, 1.0),
    k=st.floats(-1.5, 1.5),
)
def test_theta_symmetry_in_log_variables(beta, rho, k):
    """Mirroring (rho, k) flips beta in log-price coordinates.

    sigma(s0 e^g) = a e^{beta g}; under g -> -g the model becomes a e^{-beta g},
    which is no longer CEV, so compare closed form against the generic solver
    on the mirrored model instead.
    """
    spec = CevSpec(0.2, beta)
    s0 = 1.5
    K = s0 * math.exp(k)
    a = 0.2 * s0**beta
    if abs(abs(k) - rho) < 1e-6 or abs(k - rho) < 1e-6:
        return
    from shortvol import VolatilityModel

    mirrored = VolatilityModel(
        sigma=lambda S: a * (S / s0) ** (-beta),
        dsigma=lambda S: -beta * a * (S / s0) ** (-beta) / S,
        kind="custom",
    )
    direct = cev_rate_closed(spec, Market.from_rho(s0, rho), K).I
    flipped = rate_function(mirrored, Market.from_rho(s0, -rho), s0 * math.exp(-k)).I
    assert flipped == pytest.approx(direct, rel=1e-6, abs=1e-12)


def test_atm_slope_finite_difference():
    from shortvol import implied_vol_asymptotic

    market = mk(0.1)
    model = make_cev_model(SPEC)
    h = 1e-4
    up = implied_vol_asymptotic(model, market, market.forward * math.exp(h)).vol
    dn = implied_vol_asymptotic(model, market, market.forward * math.exp(-h)).vol
    slope = (up - dn) / (2 * h)
    assert slope / cev_atm_vol(SPEC, market) == pytest.approx(-0.25, abs=1e-6)
