"""Normalized ATM implied vol (s0^|beta| / sigma) sigma_BS against sigma.

The asymptotic level sits below the exact one and the two meet as sigma -> 0.
"""

import math

from shortvol.validation import FIG2_S0, FIG3_SIGMAS, fig3_table

for r in (0.1, -0.1):
    for T in (1.0, 5.0):
        print(f"r={r:+}, T={T}")
        print("  sigma   asymptotic   exact      ratio")
        for sigma, exact, asym in fig3_table(r, T, FIG3_SIGMAS):
            norm = math.sqrt(FIG2_S0) / sigma
            print(f"  {sigma:.2f}    {asym * norm:.6f}     {exact * norm:.6f}   {asym / exact:.6f}")
