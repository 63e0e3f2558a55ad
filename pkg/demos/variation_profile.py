"""rho-variation of a random walk, computed by dynamic programming.

Run with: python demos/variation_profile.py
"""
import numpy as np

from nilcircle.variation import sup_norm, variation, variation_exhaustive, variation_profile

rng = np.random.default_rng(0)
walk = np.cumsum(rng.standard_normal(2000))

print("rho    V_rho(walk)")
for rho, v in variation_profile(walk, [1, 1.5, 2, 2.5, 3, 4, 8]):
    print(f"{rho:4.1f}  {v:10.3f}")
print(f"sup |a| = {sup_norm(walk):.3f}")

# the DP agrees with trying every increasing index set on a short sequence
short = walk[:10]
print(f"\nshort sequence, rho = 2: dp {variation(short, 2):.10f}  exhaustive {variation_exhaustive(short, 2):.10f}")
