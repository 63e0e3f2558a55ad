"""Kernels on the finite quotient J_Q and on the lattice H_Q = (QZ)^{Y_d}.

V_{A,B,Q} lives on J_Q = [0, Q)^{Y_d}: a Gauss-sum weighted exponential sum
over A times a plain one over B, normalized by Q^-(d+d').  W_{k,w,Q} is the
smooth factor on H_Q; its frequency integral is reduced to a one dimensional
integral along the moment curve, since the theta-integral is the Fourier
transform of a bump and the xi-integral against J_k unfolds to
int chi(y) Bhat(h1 - A0(tau^k y)) dy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cutoffs import bump_fourier, chi, eta0, eta0_mass
from .expsums import gauss_sums_all
from .group import shape as make_shape
from .rationals import RationalSet

__all__ = [
    "GaussKernel",
    "gauss_operator_kernel",
    "WeightKernel",
    "weight_kernel_W",
]


@dataclass
class GaussKernel:
    """Values of V on J_Q, stored as an array of shape (Q,) * |Y_d| (axis order = Y_d order)."""

    Q: int
    d: int
    values: np.ndarray
    method: str

    def __call__(self, b) -> complex:
        b = tuple(int(c) % self.Q for c in b)
        if len(b) != make_shape(self.d).size:
            raise ValueError(f"expected {make_shape(self.d).size} coordinates")
        return complex(self.values[b])

    def max_abs_diff(self, other: "GaussKernel") -> float:
        if (self.Q, self.d) != (other.Q, other.d):
            raise ValueError("kernels on different quotients")
        return float(np.max(np.abs(self.values - other.values)))

    def items(self):
        for b in itertools.product(range(self.Q), repeat=self.values.ndim):
            yield b, complex(self.values[b])


def _set_mask(rset: RationalSet, Q: int, m: int) -> np.ndarray:
    """Indicator on Z_Q^m of the numerators a with a/Q in the set."""
    grids = np.indices((Q,) * m).reshape(m, -1).T
    den = Q // np.gcd.reduce(np.concatenate([grids, np.full((len(grids), 1), Q)], axis=1), axis=1)
    return np.isin(den, sorted(rset.denominators)).reshape((Q,) * m)


def gauss_operator_kernel(A: RationalSet | None, B: RationalSet | None, Q: int, d: int = 2,
                          method: str = "spectral") -> GaussKernel:
    """V_{A,B,Q}(b) = Q^-(d+d') (sum_{s in A} S(s) e(b1 . s)) (sum_{t in B} e(b2 . t)).

    ``A=None`` / ``B=None`` mean the full sets {a/Q}.  method="counting" uses
    the closed form Q^-1 #{n in Z_Q : A0(n) = b1 mod Q} 1[b2 = 0 mod Q},
    valid only for the full sets.
    """
    if Q < 1:
        raise ValueError(f"Q must be positive, got {Q}")
    sh = make_shape(d)
    dp = sh.d_prime
    A = RationalSet.fixed_denominator(d, Q) if A is None else A
    B = RationalSet.fixed_denominator(dp, Q) if B is None else B
    if A.m != d or B.m != dp:
        raise ValueError(f"A must have dimension {d} and B dimension {dp}")
    if not A.is_compatible(Q) or not B.is_compatible(Q):
        raise ValueError(f"the rational sets are not of the form a/{Q}")
    if method == "counting":
        if A.denominators != frozenset(RationalSet.fixed_denominator(d, Q).denominators) or \
                B.denominators != frozenset(RationalSet.fixed_denominator(dp, Q).denominators):
            raise ValueError("the counting formula needs the full sets of fractions a/Q")
        first = np.zeros((Q,) * d)
        for n in range(Q):
            first[tuple(pow(n, l, Q) for l in range(1, d + 1))] += 1.0 / Q
        second = np.zeros((Q,) * dp)
        second[(0,) * dp] = 1.0
        return GaussKernel(Q, d, np.multiply.outer(first, second), method)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    _, svals, _ = gauss_sums_all(Q, d)
    weights = svals.reshape((Q,) * d) * _set_mask(A, Q, d)
    # Q^-d sum_a w(a) e(b . a / Q) is exactly the inverse DFT of w
    first = np.fft.ifftn(weights)
    grids = np.indices((Q,) * dp).reshape(dp, -1).T
    second = B.exp_sum(grids).reshape((Q,) * dp).astype(float) / Q**dp
    return GaussKernel(Q, d, np.multiply.outer(first, second), method)


@dataclass(frozen=True)
class WeightKernel:
    """W_{k,w,Q} on H_Q for the given scale constants."""

    k: int
    w: int
    Q: int
    d: int = 2
    tau: float = 2.0
    delta: float = 0.4
    delta_p: float = 0.6
    nodes_per_segment: int = 12

    def __post_init__(self):
        if self.Q < 1:
            raise ValueError("Q must be positive")
        if not 0 <= self.w:
            raise ValueError("w must be >= 0")
        if self.tau ** (self.delta * self.k) < self.Q:
            raise ValueError(f"need tau^(delta k) >= Q; got {self.tau ** (self.delta * self.k):.3g} < {self.Q}")

    @property
    def shape(self):
        return make_shape(self.d)

    def _scales(self):
        sh = self.shape
        deg = sh.degrees
        return self.tau ** (self.k * deg[: sh.d].astype(float)), self.tau ** (self.k * deg[sh.d:].astype(float))

    def _radius(self, width: float) -> float:
        return self.tau ** math.floor(width)

    def _nodes(self) -> tuple[np.ndarray, np.ndarray]:
        R = self._radius(self.delta_p * self.w)
        segs = max(8, math.ceil(8 * R))
        edges = np.unique(np.concatenate([np.linspace(-2, 2, segs + 1), [-1.0, 1.0]]))
        g, wt = np.polynomial.legendre.leggauss(self.nodes_per_segment)
        a, b = edges[:-1, None], edges[1:, None]
        y = ((a + b) / 2 + (b - a) / 2 * g).ravel()
        c = ((b - a) / 2 * wt).ravel() * chi(y)
        keep = c != 0
        return y[keep], c[keep]

    def curve_integral(self, h1: np.ndarray) -> np.ndarray:
        """int chi(y) Bhat_{delta' w}(h1 - A0(tau^k y)) dy for rows h1 in Z^d."""
        h1 = np.atleast_2d(np.asarray(h1, dtype=float))
        s1, _ = self._scales()
        y, c = self._nodes()
        curve = np.stack([y**l for l in range(1, self.d + 1)], axis=1) * s1
        out = np.empty(len(h1))
        for start in range(0, len(h1), 2048):
            diff = h1[start:start + 2048, None, :] - curve[None, :, :]
            out[start:start + 2048] = bump_fourier(diff, s1, self.delta_p * self.w, self.tau) @ c
        return out

    def central_factor(self, h2: np.ndarray) -> np.ndarray:
        _, s2 = self._scales()
        h2 = np.atleast_2d(np.asarray(h2, dtype=float))
        if s2.size == 0:
            return np.ones(len(h2))
        return bump_fourier(h2, s2, self.delta * self.w, self.tau)

    def phi(self, h: np.ndarray) -> np.ndarray:
        s1, s2 = self._scales()
        h = np.atleast_2d(np.asarray(h, dtype=float))
        width = math.floor(self.delta * self.k)
        r1 = np.sqrt(np.sum((h[:, : self.d] / s1) ** 2, axis=1))
        r2 = np.sqrt(np.sum((h[:, self.d:] / s2) ** 2, axis=1)) if s2.size else np.zeros(len(h))
        return eta0(r1 * self.tau**-width) * eta0(r2 * self.tau**-width)

    def __call__(self, h) -> np.ndarray | float:
        """W(h) for one element of H_Q or an array of rows."""
        arr = np.atleast_2d(np.asarray(h, dtype=np.int64))
        if arr.shape[1] != self.shape.size:
            raise ValueError(f"expected {self.shape.size} coordinates")
        if np.any(arr % self.Q):
            raise ValueError(f"h must lie in H_Q, every coordinate a multiple of {self.Q}")
        m = self.shape.size
        val = (self.Q**m) * self.phi(arr) * self.central_factor(arr[:, self.d:]) * self.curve_integral(arr[:, : self.d])
        return float(val[0]) if np.ndim(h) == 1 else val

    def zero_frequency_mass(self) -> float:
        """The frequency integrand at xi = theta = 0: eta(0) eta(0) J_k(0) = int chi."""
        return eta0_mass()

    def _window(self, lattice: int) -> list[np.ndarray]:
        s1, s2 = self._scales()
        width = self.tau ** math.floor(self.delta * self.k)
        axes = []
        for s in list(s1) + list(s2):
            top = math.floor(2 * width * s / lattice)
            axes.append(np.arange(-top, top + 1) * lattice)
        return axes

    def window_sum(self, lattice: str = "H_Q") -> float:
        """Sum of W over every point of H_Q (lattice="H_Q") or of Z^{Y_d} (lattice="Z") where phi is nonzero.

        W is a product of a non-central and a central factor, so the sum is
        the product of the two separate sums.
        """
        step = self.Q if lattice == "H_Q" else 1 if lattice == "Z" else None
        if step is None:
            raise ValueError("lattice must be 'H_Q' or 'Z'")
        axes = self._window(step)
        s1, s2 = self._scales()
        width = math.floor(self.delta * self.k)
        grid1 = np.stack(np.meshgrid(*axes[: self.d], indexing="ij"), axis=-1).reshape(-1, self.d)
        phi1 = eta0(np.sqrt(np.sum((grid1 / s1) ** 2, axis=1)) * self.tau**-width)
        keep = phi1 != 0
        part1 = float(np.sum(phi1[keep] * self.curve_integral(grid1[keep])))
        if s2.size:
            grid2 = np.stack(np.meshgrid(*axes[self.d:], indexing="ij"), axis=-1).reshape(-1, s2.size)
            phi2 = eta0(np.sqrt(np.sum((grid2 / s2) ** 2, axis=1)) * self.tau**-width)
            part2 = float(np.sum(phi2 * self.central_factor(grid2)))
        else:
            part2 = 1.0
        return self.Q ** self.shape.size * part1 * part2

    def mass_bound(self, grid: int = 96) -> float:
        """Q^{d+d'} int int |eta(tau^k xi) eta(tau^k theta) J_k(xi)| dxi dtheta, which bounds |W|."""
        s1, _ = self._scales()
        R1 = self._radius(self.delta_p * self.w)
        g, wt = np.polynomial.legendre.leggauss(grid)
        segs = np.linspace(-2 * R1, 2 * R1, 5)
        xs = np.concatenate([(a + b) / 2 + (b - a) / 2 * g for a, b in zip(segs[:-1], segs[1:])])
        ws = np.concatenate([(b - a) / 2 * wt for a, b in zip(segs[:-1], segs[1:])])
        y, c = self._nodes_for_profile()
        total = 0.0
        for idx in itertools.product(range(xs.size), repeat=self.d - 1):
            fixed = xs[list(idx)]
            zeta = np.column_stack([xs] + [np.full(xs.size, v) for v in fixed])
            rad = eta0(np.sqrt(np.sum(zeta**2, axis=1)) / R1)
            if not rad.any():
                continue
            phase = zeta @ np.stack([y**l for l in range(1, self.d + 1)])
            J = np.abs(np.exp(-2j * np.pi * phase) @ c)
            total += float(np.prod(ws[list(idx)]) * np.sum(ws * rad * J))
        central_mass = float(self.central_factor(np.zeros((1, len(self._scales()[1]))))[0])
        return self.Q ** self.shape.size * total / float(np.prod(s1)) * central_mass

    def _nodes_for_profile(self) -> tuple[np.ndarray, np.ndarray]:
        R1 = self._radius(self.delta_p * self.w)
        segs = max(8, math.ceil(4 * R1 * 2**self.d))
        edges = np.unique(np.concatenate([np.linspace(-2, 2, segs + 1), [-1.0, 1.0]]))
        g, wt = np.polynomial.legendre.leggauss(16)
        a, b = edges[:-1, None], edges[1:, None]
        y = ((a + b) / 2 + (b - a) / 2 * g).ravel()
        return y, ((b - a) / 2 * wt).ravel() * chi(y)


def weight_kernel_W(k: int, w: int, Q: int, h, **constants) -> float:
    """W_{k,w,Q}(h) for h in H_Q; keyword constants d, tau, delta, delta_p."""
    return WeightKernel(k, w, Q, **constants)(h)
