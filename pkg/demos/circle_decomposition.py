"""Split the moment-curve kernel into major-arc pieces and a remainder, then add them back up.

Run with: python demos/circle_decomposition.py
"""
from nilcircle.circle import DecompositionParams, decompose_kernel

params = DecompositionParams(d=2, tau=2.0, k=6, delta=0.4, delta_p=0.6)
dec = decompose_kernel(params, mode="central")
print(f"k = {params.k}, probe points: {len(dec.probes)}")
for name, comp in dec.components.items():
    print(f"  {name:12s} support {len(comp):6d}  mass {complex(comp.total()).real:+.6f}  max {comp.max_abs():.3e}")
print(f"source mass {complex(dec.source.total()).real:.6f}")
print(f"max |source - sum of pieces| = {dec.residual:.2e}")

print("\nnoncentral stage, one decomposition per denominator level s:")
for s, part in decompose_kernel(params, mode="noncentral").items():
    print(f"  s = {s}: {len(part.components)} pieces, residual {part.residual:.2e}")
