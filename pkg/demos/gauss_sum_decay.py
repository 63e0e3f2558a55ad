"""Complete Gauss sums S(a/p) for quadratic phases, and their q^(-1/2) decay.

Run with: python demos/gauss_sum_decay.py
"""
import numpy as np

from nilcircle.expsums import decay_fit, gauss_sums_all, nil_gauss_table

primes = [p for p in range(3, 200) if all(p % f for f in range(2, int(p**0.5) + 1))]
points = []
for p in primes:
    _, vals, reduced = gauss_sums_all(p, 2)
    points.append((p, float(np.abs(vals[reduced]).max())))

print(" p    max|S|     p^-1/2")
for p, top in points[:8]:
    print(f"{p:3d}  {top:.6f}  {p**-0.5:.6f}")
slope, _, rms = decay_fit(points)
print(f"log-log slope over {len(points)} primes: {slope:.4f} (rms residual {rms:.1e})")

# the group analogue: largest |G(a/q)| over reduced a, for single-letter words
print("\n q  max|G|")
for q in range(2, 13):
    T = np.abs(nil_gauss_table(q, 1, 2))
    reduced = np.gcd.reduce(np.stack(np.indices((q,) * 3) + [np.full((q,) * 3, q)]), axis=0) == 1
    print(f"{q:2d}  {T[reduced].max():.4f}")
