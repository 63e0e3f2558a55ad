"""Polynomial ergodic averages on two finite systems.

Run with: python demos/ergodic_convergence.py
"""
import numpy as np

from nilcircle.ergodic import IntPolynomial, commutator_identity_check, cyclic_system, ergodic_average, \
    heisenberg_quotient

# rotation by one on Z/101, averaging a point mass along n and along n^2.
# Along n the limit is uniform. Along n^2 it is the share of residues n with n^2 = -x,
# which is 2/101 on nonzero squares and 1/101 at 0, since -1 is a square mod 101.
s = cyclic_system(101)
f = np.zeros(101)
f[0] = 1.0
squares = np.bincount([(-n * n) % 101 for n in range(101)], minlength=101) / 101
limits = {"n": np.full(101, 1 / 101), "n^2": squares}
for log2N in (6, 8, 10, 12, 14):
    for label, poly in (("n", IntPolynomial((0, 1))), ("n^2", IntPolynomial((0, 0, 1)))):
        avg = ergodic_average(s, f, [poly], 2**log2N)
        print(f"N = 2^{log2N:<2d} along {label:3s}: distance to the limit {np.max(np.abs(avg - limits[label])):.5f}")

# two non-commuting maps on a Heisenberg quotient; the commutator relation holds exactly
h = heisenberg_quotient(2, 3)
print(f"\nHeisenberg quotient with {h.size} points")
rng = np.random.default_rng(1)
checks = [commutator_identity_check(h, *rng.integers(-6, 7, (2, 2)).tolist()) for _ in range(50)]
print(f"commutator identity held in {sum(checks)} of {len(checks)} random cases")
