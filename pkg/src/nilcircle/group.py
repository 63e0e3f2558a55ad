"""Exact arithmetic on the universal step-two nilpotent group G0(d).

Coordinates are indexed by Y_d = {(l1, l2) : 0 <= l2 < l1 <= d}.  The
non-central coordinates (l1, 0) come first, followed by the central ones
(l1, l2), l2 >= 1, in lexicographic order.  The product is

    [x.y]_{l1,0}  = x_{l1,0} + y_{l1,0}
    [x.y]_{l1,l2} = x_{l1,l2} + y_{l1,l2} + x_{l1,0} * y_{l2,0}

Lattice elements carry Python integers (arbitrary precision).  The batched
array helpers at the bottom work on int64 arrays and fall back to object
arrays whenever a product could leave the int64 range.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from numbers import Integral, Real
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GroupShape",
    "GroupElement",
    "CosetPair",
    "shape",
    "identity",
    "multiply",
    "inverse",
    "dilate",
    "moment_curve",
    "bilinear_r0",
    "d_form",
    "alternating_word",
    "coset_decompose",
    "commutator",
    "DEFAULT_ATOL",
]

DEFAULT_ATOL = 1e-12
_INT64_SAFE = 2**62


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GroupShape:
    """Index bookkeeping for G0(d)."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, Integral) or self.d < 1:
            raise ValueError(f"degree must be a positive integer, got {self.d!r}")

    @property
    def d_prime(self) -> int:
        return self.d * (self.d - 1) // 2

    @property
    def index_set(self) -> tuple[tuple[int, int], ...]:
        return _index_set(self.d)

    @property
    def central_indices(self) -> tuple[tuple[int, int], ...]:
        return _index_set(self.d)[self.d:]

    @property
    def size(self) -> int:
        return self.d + self.d_prime

    def position(self, l1: int, l2: int) -> int:
        return _positions(self.d)[(l1, l2)]

    @property
    def degrees(self) -> np.ndarray:
        """Homogeneous degree l1 + l2 of every coordinate."""
        return np.array([l1 + l2 for l1, l2 in self.index_set], dtype=np.int64)

    @property
    def central_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Positions (in the non-central block) of the factors of each central coordinate."""
        return _central_pairs(self.d)

    def __repr__(self):
        return f"GroupShape(d={self.d})"


@lru_cache(maxsize=None)
def shape(d: int) -> GroupShape:
    return GroupShape(d)


@lru_cache(maxsize=None)
def _index_set(d: int) -> tuple[tuple[int, int], ...]:
    noncentral = [(l1, 0) for l1 in range(1, d + 1)]
    central = [(l1, l2) for l1 in range(1, d + 1) for l2 in range(1, l1)]
    return tuple(noncentral + central)


@lru_cache(maxsize=None)
def _positions(d: int) -> dict:
    return {idx: i for i, idx in enumerate(_index_set(d))}


@lru_cache(maxsize=None)
def _central_pairs(d: int) -> tuple[np.ndarray, np.ndarray]:
    central = _index_set(d)[d:]
    left = np.array([l1 - 1 for l1, _ in central], dtype=np.intp)
    right = np.array([l2 - 1 for _, l2 in central], dtype=np.intp)
    return left, right


def _is_int(v) -> bool:
    return isinstance(v, Integral) or (isinstance(v, np.integer))


@dataclass(frozen=True)
class GroupElement:
    """A point of G0#(d); lattice points of G0(d) when all coordinates are integers."""

    shape: GroupShape
    coords: tuple

    def __post_init__(self):
        if len(self.coords) != self.shape.size:
            raise ShapeMismatch(
                f"expected {self.shape.size} coordinates for d={self.shape.d}, got {len(self.coords)}"
            )
        # normalise numpy scalars to python numbers so hashing/equality is exact
        fixed = tuple(int(c) if _is_int(c) else float(c) if isinstance(c, (np.floating,)) else c
                      for c in self.coords)
        object.__setattr__(self, "coords", fixed)

    @classmethod
    def from_coords(cls, coords: Sequence, d: int | None = None) -> "GroupElement":
        coords = tuple(coords)
        if d is None:
            d = _degree_from_length(len(coords))
        return cls(shape(d), coords)

    @property
    def d(self) -> int:
        return self.shape.d

    @property
    def is_lattice(self) -> bool:
        return all(_is_int(c) for c in self.coords)

    @property
    def noncentral(self) -> tuple:
        return self.coords[: self.shape.d]

    @property
    def central(self) -> tuple:
        return self.coords[self.shape.d:]

    def __getitem__(self, index: tuple[int, int]):
        return self.coords[self.shape.position(*index)]

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def inverse(self) -> "GroupElement":
        return inverse(self)

    def is_identity(self, atol: float = DEFAULT_ATOL) -> bool:
        return self.allclose(identity(self.shape), atol=atol)

    def allclose(self, other: "GroupElement", atol: float = DEFAULT_ATOL) -> bool:
        if self.shape != other.shape:
            return False
        if self.is_lattice and other.is_lattice:
            return self.coords == other.coords
        return all(abs(a - b) <= atol for a, b in zip(self.coords, other.coords))

    def to_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=np.int64 if self.is_lattice else float)

    def to_text(self) -> str:
        body = ",".join(repr(c) if not _is_int(c) else str(c) for c in self.coords)
        return f"d={self.d}:[{body}]"

    @classmethod
    def from_text(cls, text: str) -> "GroupElement":
        m = re.fullmatch(r"\s*d=(\d+):\[(.*)\]\s*", text)
        if not m:
            raise ValueError(f"cannot parse group element {text!r}")
        d = int(m.group(1))
        parts = [p.strip() for p in m.group(2).split(",") if p.strip()]
        coords = [int(p) if re.fullmatch(r"[+-]?\d+", p) else float(p) for p in parts]
        return cls(shape(d), tuple(coords))

    def __str__(self):
        return self.to_text()


def _degree_from_length(n: int) -> int:
    # n = d + d(d-1)/2 = d(d+1)/2
    d = int(round((math.isqrt(8 * n + 1) - 1) / 2))
    if d * (d + 1) // 2 != n or d < 1:
        raise ValueError(f"{n} is not a valid coordinate count |Y_d|")
    return d


def identity(sh: GroupShape | int) -> GroupElement:
    sh = shape(sh) if isinstance(sh, Integral) else sh
    return GroupElement(sh, (0,) * sh.size)


def _check_same(x: GroupElement, y: GroupElement):
    if x.shape != y.shape:
        raise ShapeMismatch(f"shape mismatch: d={x.d} vs d={y.d}")


def bilinear_r0(x1: Sequence, y1: Sequence) -> tuple:
    """R0(x, y)_{l1 l2} = x_{l1} * y_{l2} over the central indices, l2 < l1."""
    if len(x1) != len(y1):
        raise ShapeMismatch(f"non-central vectors of different lengths {len(x1)} and {len(y1)}")
    d = len(x1)
    return tuple(x1[l1 - 1] * y1[l2 - 1] for l1, l2 in _index_set(d)[d:])


def multiply(x: GroupElement, y: GroupElement) -> GroupElement:
    _check_same(x, y)
    nc = tuple(a + b for a, b in zip(x.noncentral, y.noncentral))
    r0 = bilinear_r0(x.noncentral, y.noncentral)
    c = tuple(a + b + r for a, b, r in zip(x.central, y.central, r0))
    return GroupElement(x.shape, nc + c)


def inverse(g: GroupElement) -> GroupElement:
    g1 = g.noncentral
    r0 = bilinear_r0(g1, g1)
    return GroupElement(g.shape, tuple(-a for a in g1) + tuple(-c + r for c, r in zip(g.central, r0)))


def commutator(x: GroupElement, y: GroupElement) -> GroupElement:
    """[x, y] = x^-1 y^-1 x y; always central."""
    return inverse(x) * inverse(y) * x * y


def dilate(lam, g: GroupElement) -> GroupElement:
    """Anisotropic dilation: coordinate (l1, l2) scales by lam**(l1 + l2)."""
    if not isinstance(lam, Real) or lam <= 0:
        raise ValueError(f"dilation factor must be positive, got {lam!r}")
    if g.is_lattice and not _is_int(lam):
        if float(lam).is_integer():
            lam = int(lam)
    return GroupElement(
        g.shape,
        tuple(c * lam ** (l1 + l2) for c, (l1, l2) in zip(g.coords, g.shape.index_set)),
    )


def moment_curve(n, sh: GroupShape | int) -> GroupElement:
    sh = shape(sh) if isinstance(sh, Integral) else sh
    return GroupElement(sh, tuple(n**l for l in range(1, sh.d + 1)) + (0,) * sh.d_prime)


def d_form(x: Sequence, y: Sequence, variant: str = "D", sh: GroupShape | int = 2) -> GroupElement:
    """Closed form of the alternating moment-curve words D(x, y) and D~(x, y).

    D(x, y)  = A0(x_1)^-1 A0(y_1) ... A0(x_r)^-1 A0(y_r)
    D~(x, y) = A0(x_1) A0(y_1)^-1 ... A0(x_r) A0(y_r)^-1
    """
    sh = shape(sh) if isinstance(sh, Integral) else sh
    if len(x) != len(y):
        raise ValueError("x and y must have the same length")
    if variant not in ("D", "Dt"):
        raise ValueError(f"variant must be 'D' or 'Dt', got {variant!r}")
    d = sh.d
    sign = 1 if variant == "D" else -1
    # u_j^(l) = y_j^l - x_j^l for D, x_j^l - y_j^l for D~
    incr = [[sign * (yj**l - xj**l) for l in range(1, d + 1)] for xj, yj in zip(x, y)]
    nc = tuple(sum(u[l - 1] for u in incr) for l in range(1, d + 1))
    central = []
    for l1, l2 in sh.central_indices:
        cross = 0
        prefix = 0
        for u in incr:
            cross += prefix * u[l2 - 1]
            prefix += u[l1 - 1]
        if variant == "D":
            diag = sum(xj ** (l1 + l2) - xj**l1 * yj**l2 for xj, yj in zip(x, y))
        else:
            diag = sum(yj ** (l1 + l2) - xj**l1 * yj**l2 for xj, yj in zip(x, y))
        central.append(cross + diag)
    return GroupElement(sh, nc + tuple(central))


def alternating_word(x: Sequence, y: Sequence, variant: str = "D", sh: GroupShape | int = 2) -> GroupElement:
    """The same words as :func:`d_form`, multiplied out letter by letter."""
    sh = shape(sh) if isinstance(sh, Integral) else sh
    g = identity(sh)
    for xj, yj in zip(x, y):
        a, b = moment_curve(xj, sh), moment_curve(yj, sh)
        if variant == "D":
            g = g * inverse(a) * b
        elif variant == "Dt":
            g = g * a * inverse(b)
        else:
            raise ValueError(f"variant must be 'D' or 'Dt', got {variant!r}")
    return g


@dataclass(frozen=True)
class CosetPair:
    box: GroupElement      # element of J_Q, coordinates in [0, Q-1]
    lattice: GroupElement  # element of H_Q, coordinates divisible by Q
    modulus: int

    def recompose(self) -> GroupElement:
        return self.box * self.lattice


def coset_decompose(g: GroupElement, Q: int) -> CosetPair:
    """Unique (b, h) in J_Q x H_Q with b.h = g."""
    if not _is_int(Q) or Q < 1:
        raise ValueError(f"modulus must be a positive integer, got {Q!r}")
    if not g.is_lattice:
        raise ValueError("coset decomposition needs a lattice element")
    b1 = tuple(c % Q for c in g.noncentral)
    h1 = tuple(c - b for c, b in zip(g.noncentral, b1))
    # central: g2 = b2 + h2 + R0(b1, h1) and R0(b1, h1) is divisible by Q
    twist = bilinear_r0(b1, h1)
    rest = tuple(c - t for c, t in zip(g.central, twist))
    b2 = tuple(c % Q for c in rest)
    h2 = tuple(c - b for c, b in zip(rest, b2))
    return CosetPair(GroupElement(g.shape, b1 + b2), GroupElement(g.shape, h1 + h2), int(Q))


# ---------------------------------------------------------------------------
# batched helpers on (n, |Y_d|) integer arrays

def _bound(a: np.ndarray) -> int:
    if a.size == 0:
        return 0
    if a.dtype == object:
        return max(abs(int(v)) for v in a.ravel())
    return int(np.abs(a).max())


def as_coord_array(points, d: int) -> np.ndarray:
    """Stack group elements / coordinate rows into an (n, |Y_d|) array."""
    rows = [p.coords if isinstance(p, GroupElement) else tuple(p) for p in points]
    size = shape(d).size
    if not rows:
        return np.zeros((0, size), dtype=np.int64)
    big = any(abs(int(v)) >= _INT64_SAFE for r in rows for v in r)
    arr = np.array(rows, dtype=object if big else np.int64)
    if arr.ndim != 2 or arr.shape[1] != size:
        raise ShapeMismatch(f"rows must have {size} coordinates")
    return arr


def mul_arrays(X: np.ndarray, Y: np.ndarray, d: int) -> np.ndarray:
    """Row-wise (or broadcast) group product of coordinate arrays."""
    if X.dtype != object and Y.dtype != object:
        bx, by = _bound(X), _bound(Y)
        if 2 * bx * by + bx + by >= _INT64_SAFE:
            X, Y = X.astype(object), Y.astype(object)
    left, right = _central_pairs(d)
    out = X + Y
    if len(left):
        out[..., d:] += X[..., left] * Y[..., right]
    return out


def inv_arrays(X: np.ndarray, d: int) -> np.ndarray:
    if X.dtype != object and 2 * _bound(X) ** 2 >= _INT64_SAFE:
        X = X.astype(object)
    left, right = _central_pairs(d)
    out = -X
    if len(left):
        out[..., d:] += X[..., left] * X[..., right]
    return out


def moment_curve_array(ns: Iterable[int], d: int) -> np.ndarray:
    ns = [int(n) for n in ns]
    return as_coord_array([moment_curve(n, d) for n in ns], d)
