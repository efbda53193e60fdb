"""Optimal log-price paths g(t) for square-root CEV at rho = 1.

Strikes above s0 e^rho give paths rising faster than rho t, strikes below
s0 e^-rho fall faster than -rho t, and the rest stay inside the cone
|g| < rho t, some of them dipping before turning up.
"""

import math
import sys

import numpy as np

from shortvol import CevSpec, Market, classify_region, make_cev_model, optimal_path, rate_function

spec = CevSpec(0.14, -0.5)
model = make_cev_model(spec)
market = Market.from_rho(2.0, 1.0)

paths = {}
for k in np.arange(-1.5, 1.51, 0.25):
    K = 2.0 * math.exp(k)
    res = rate_function(model, market, K)
    p = optimal_path(model, market, K, n_samples=101, result=res)
    paths[k] = (classify_region(market, K), p)
    turn = f", turns at t={p.t_star:.3f}" if p.t_star is not None else ""
    print(f"k={k:+.2f}  {str(res.region):8s} {res.branch:5s} I={res.I:.6f}  min g={p.g.min():+.4f}{turn}")

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    colours = {"region1": "tab:blue", "region2": "tab:green", "region3": "tab:red", "atm": "k"}
    for region, p in paths.values():
        plt.plot(p.t, p.g, color=colours[str(region)])
    t = np.linspace(0, 1, 2)
    plt.plot(t, t, "k:", t, -t, "k:")
    plt.xlabel("t")
    plt.ylabel("g(t)")
    plt.show()
