"""Asymptotic smile with carry against exact CEV implied vols.

Square-root CEV (beta = -1/2, s0 = 2, sigma = 0.14, r = 0.1) on x = log(K/F)
in [-1, 1].  Prints the worst gap of the carry-aware smile and of the plain
zero-carry (BBF) smile against the exact price, for several maturities.
Pass --plot to draw the T = 1 curves (needs matplotlib).
"""

import sys

import numpy as np

from shortvol.validation import fig2_table



def columns(T):
    rows = fig2_table(T)
    x, K, exact, asym, bbf = (np.array([r[i] for r in rows]) for i in range(5))
    region3 = np.array([r[5] == "region3" for r in rows])
    return {"x": x, "K": K, "exact": exact, "asymptotic": asym, "bbf": bbf, "region3": region3}


for T in (1.0, 2.0, 5.0, 10.0):
    tab = columns(T)
    gap_rho = np.abs(tab["asymptotic"] - tab["exact"])
    gap_bbf = np.abs(tab["bbf"] - tab["exact"])
    better = np.mean(gap_rho <= gap_bbf)
    print(f"T={T:>4}: max gap with carry {gap_rho.max():.2e}, zero-carry {gap_bbf.max():.2e}, "
          f"carry closer at {better:.0%} of strikes")

# region 3 sits between the spot and the forward
tab = columns(1.0)
inside = tab["region3"]
print("region 3 strikes (x):", np.round(tab["x"][inside], 3))

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    plt.plot(tab["x"], tab["exact"], "k.", label="exact")
    plt.plot(tab["x"], tab["asymptotic"], "b-", label="asymptotic, with carry")
    plt.plot(tab["x"], tab["bbf"], "g--", label="zero carry")
    plt.plot(tab["x"][inside], tab["asymptotic"][inside], "r-", lw=2)
    plt.xlabel("log(K/F)")
    plt.ylabel("implied vol")
    plt.legend()
    plt.show()
