"""A short tour of the rate function and what feeds into it."""

import math

from shortvol import (
    CevSpec,
    Market,
    cev_rate_closed,
    constant_model,
    implied_vol_asymptotic,
    make_cev_model,
    rate_expansion_small_rho,
    rate_function,
    sigma1_rho_coefficient,
)

# Black-Scholes: I = (k - rho)^2 / (2 sigma^2)
mk = Market.from_rho(1.0, 0.03)
print("constant sigma:", rate_function(constant_model(0.2), mk, math.exp(0.13)).I, "(expect 0.125)")

# CEV: generic solver vs closed form, across the three regions
spec = CevSpec(0.14, -0.5)
model = make_cev_model(spec)
mk = Market.from_rho(2.0, 0.5)
for k in (-1.0, -0.2, 0.2, 1.0):
    K = 2.0 * math.exp(k)
    g, c = rate_function(model, mk, K), cev_rate_closed(spec, mk, K)
    print(f"k={k:+.1f} {str(g.region):8s} generic {g.I:.12f} closed {c.I:.12f}")

# small carry: I = I0 + rho I1 + O(rho^2)
mk0 = Market.from_rho(2.0, 0.0)
I0, I1 = rate_expansion_small_rho(model, mk0, 3.0)
for rho in (1e-2, 1e-3):
    I = rate_function(model, Market.from_rho(2.0, rho), 3.0).I
    print(f"rho={rho:g}: (I - I0)/rho = {(I - I0) / rho:.8f}, I1 = {I1:.8f}")

# the O(rho) term of the implied vol
print("sigma1 at K=3:", sigma1_rho_coefficient(model, mk0, 3.0))
print("smile at K=3, rho=0.1:", implied_vol_asymptotic(model, Market.from_rho(2.0, 0.1), 3.0).vol)
