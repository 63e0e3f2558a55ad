"""Lattice points in homogeneous quasi-balls on G0(2).

Run with: python demos/quasi_balls.py
"""
from nilcircle.quasi import QuasiGeometry, ball_count, comparability_ratio

# coordinate degrees 1, 2, 3 give homogeneous dimension 6, so counts grow like r^6
g = QuasiGeometry.uniform(2)
print(" r   points   r^6")
for r in (1.5, 2, 3, 4, 6, 8):
    print(f"{r:3g}  {ball_count(g, (0, 0, 0), r):7d}  {r**6:7.0f}")

# balls centred away from the origin hold as many points as the centred one
print(f"\nshifted centre, r = 4: {ball_count(g, (5, -7, 40), 4)} points")

# with weights and a lattice modulus the count still tracks the volume
geom = QuasiGeometry.from_scale(2, 4, Q=2)
for r in (8, 16, 32):
    print(f"Q = 2, w = 4, r = {r}: count / volume = {comparability_ratio(geom, r):.3f}")
