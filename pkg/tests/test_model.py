import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shortvol import CevSpec, DomainError, Market, Region, classify_region, constant_model, make_cev_model


def test_classify_examples():
    mk = Market.from_rho(2.0, 0.1)
    assert classify_region(mk, 2.0 * math.exp(0.2)) == Region.REGION1
    assert classify_region(mk, 2.0 * math.exp(-0.2)) == Region.REGION2
    assert classify_region(mk, 2.0 * math.exp(0.05)) == Region.REGION3
    mk_neg = Market.from_rho(2.0, -0.1)
    assert classify_region(mk_neg, 2.0 * math.exp(-0.1)) == Region.ATM


def test_atm_sits_on_the_right_seam():
    # for rho > 0 the forward is the region 1/3 seam, for rho < 0 the region 2/3 seam
    eps = 1e-9
    up = Market.from_rho(1.0, 0.3)
    assert classify_region(up, math.exp(0.3 + eps)) == Region.REGION1
    assert classify_region(up, math.exp(0.3 - eps)) == Region.REGION3
    dn = Market.from_rho(1.0, -0.3)
    assert classify_region(dn, math.exp(-0.3 - eps)) == Region.REGION2
    assert classify_region(dn, math.exp(-0.3 + eps)) == Region.REGION3


@pytest.mark.parametrize("K", [0.0, -1.0, math.inf, math.nan])
def test_classify_rejects_bad_strikes(K):
    with pytest.raises(DomainError):
        classify_region(Market.from_rho(1.0, 0.1), K)


def test_market_rejects_non_finite():
    with pytest.raises(DomainError):
        Market(1.0, math.nan, 0.0, 1.0)
    with pytest.raises(DomainError):
        Market(1.0, 0.1, 0.0, 0.0)


def test_cev_model_values():
    m = make_cev_model(CevSpec(0.14, -0.5))
    assert m.sigma(2.0) == pytest.approx(0.14 / math.sqrt(2.0), rel=1e-15)
    assert m.sigma(4.0) == pytest.approx(0.07, rel=1e-15)
    assert make_cev_model(CevSpec(1.0, -0.5)).sigma(1.0) == 1.0
    assert m.dsigma(2.0) == pytest.approx(0.14 * -0.5 * 2.0**-1.5, rel=1e-15)
    assert m.kind == "cev"


@pytest.mark.parametrize("beta", [-0.6, 0.0, 0.2])
def test_cev_beta_range(beta):
    with pytest.raises(DomainError):
        CevSpec(0.14, beta)


def test_constant_model_arrays():
    m = constant_model(0.2)
    S = np.array([0.5, 1.0, 3.0])
    assert np.all(m.sigma(S) == 0.2)
    assert np.all(m.dsigma(S) == 0.0)
    assert m.dsigma(1.0) == 0.0


@given(st.floats(-2.0, 2.0), st.floats(0.05, 5.0))
def test_classification_partitions(rho, K):
    mk = Market.from_rho(1.0, rho)
    region = classify_region(mk, K)
    k = math.log(K)
    hits = [k >= abs(rho), k <= -abs(rho), -abs(rho) < k < abs(rho)]
    if region == Region.ATM:
        assert abs(k - rho) < 1e-12
    else:
        assert sum(hits) == 1 or rho == 0.0
        idx = {Region.REGION1: 0, Region.REGION2: 1, Region.REGION3: 2}[region]
        assert hits[idx]


@settings(max_examples=50)
@given(st.floats(-1.0, 1.0))
def test_x_equals_k_minus_rho(rho):
    mk = Market.from_rho(2.0, rho, T=0.7)
    K = np.geomspace(0.5, 8.0, 25)
    assert np.all(mk.log_moneyness(K) == mk.log_strike(K) - mk.rho)
    assert mk.rho == pytest.approx(rho, rel=1e-15, abs=1e-16)
