"""Arithmetic on G0(2) and a smoothed average along the moment curve.

Run with: python demos/group_arithmetic.py
"""
from nilcircle import AverageParams, GroupElement, SparseFunction, apply_average, convolve, dilate, inverse, multiply
from nilcircle import moment_curve

x = GroupElement.from_coords((1, 2, 0))
y = GroupElement.from_coords((3, -1, 5))

print("x * y       =", multiply(x, y).coords)
print("y * x       =", multiply(y, x).coords)  # differs in the central slot
print("x * x^-1    =", multiply(x, inverse(x)).coords)
print("2 o (x * y) =", dilate(2, multiply(x, y)).coords)
print("2 o x * 2 o y =", multiply(dilate(2, x), dilate(2, y)).coords)

# points of the moment curve multiply like this: the central coordinate picks up n^2 m
for n, m in [(1, 2), (2, 1), (3, -3)]:
    p = multiply(moment_curve(n, 2), moment_curve(m, 2))
    print(f"A({n}) A({m}) =", p.coords)

# a delta smeared by the average at scale N = 8, then convolved with itself
f = SparseFunction.delta((0, 0, 0), 2)
avg = apply_average(f, AverageParams(2, N=8))
print("support of the average:", len(avg), " total mass:", round(complex(avg.total()).real, 6))
twice = convolve(avg, avg)
print("support after convolving with itself:", len(twice), " mass:", round(complex(twice.total()).real, 6))
