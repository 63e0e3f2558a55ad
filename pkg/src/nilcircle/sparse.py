"""Finitely supported functions on G0(d): convolution, moment-curve averages, TT* kernels.

Convention: (f * g)(x) = sum_y f(y^-1 x) g(y), so that delta_a * delta_b = delta_{b a}
and f * (K1 * K2) = (f * K1) * K2.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from numbers import Integral, Rational
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .cutoffs import CutoffFunction
from .group import (
    _INT64_SAFE,
    GroupElement,
    GroupShape,
    ShapeMismatch,
    as_coord_array,
    inv_arrays,
    inverse,
    mul_arrays,
    multiply,
    shape as make_shape,
)

__all__ = [
    "SparseFunction",
    "AverageParams",
    "convolve",
    "convolve_at",
    "average_kernel",
    "apply_average",
    "ttstar_kernel",
    "lp_norm",
    "inner",
    "PRUNE_TOL",
]

PRUNE_TOL = 1e-15


def _is_exact(v) -> bool:
    return isinstance(v, (Integral, Rational)) and not isinstance(v, bool)


def _is_zero(v) -> bool:
    if type(v) is complex or type(v) is float:
        return abs(v) < PRUNE_TOL
    if _is_exact(v):
        return v == 0
    return abs(v) < PRUNE_TOL


def _key(g, d: int) -> tuple:
    if isinstance(g, GroupElement):
        if g.d != d:
            raise ShapeMismatch(f"element of G0({g.d}) used with a function on G0({d})")
        return g.coords
    key = tuple(int(c) for c in g)
    if len(key) != make_shape(d).size:
        raise ShapeMismatch(f"expected {make_shape(d).size} coordinates, got {len(key)}")
    return key


class SparseFunction:
    """Complex (or exact rational) function on G0(d) with finite support.

    Values with modulus below 1e-15 are dropped on construction; exact zeros
    are dropped for integer and Fraction values.
    """

    __slots__ = ("shape", "_entries")

    def __init__(self, sh: GroupShape | int, entries: Mapping | Iterable = ()):
        sh = make_shape(sh) if isinstance(sh, Integral) else sh
        self.shape = sh
        items = entries.items() if isinstance(entries, Mapping) else entries
        store: dict = {}
        for g, v in items:
            k = _key(g, sh.d)
            store[k] = store.get(k, 0) + v
        self._entries = {k: v for k, v in store.items() if not _is_zero(v)}

    # construction -----------------------------------------------------------------
    @classmethod
    def delta(cls, g: GroupElement | Sequence[int], sh: GroupShape | int | None = None, value=1):
        if isinstance(g, GroupElement):
            sh = g.shape
        return cls(sh, {tuple(g.coords if isinstance(g, GroupElement) else g): value})

    @classmethod
    def zero(cls, sh: GroupShape | int) -> "SparseFunction":
        return cls(sh, {})

    @classmethod
    def _trusted(cls, sh: GroupShape, store: dict) -> "SparseFunction":
        """Wrap a dict whose keys are already int tuples of the right length and whose values are nonzero."""
        out = cls.__new__(cls)
        out.shape = sh
        out._entries = store
        return out

    @classmethod
    def from_arrays(cls, sh: GroupShape | int, coords: np.ndarray, values: np.ndarray) -> "SparseFunction":
        sh = make_shape(sh) if isinstance(sh, Integral) else sh
        coords = np.asarray(coords)
        values = np.asarray(values)
        if coords.dtype == object or values.dtype == object:
            store = {}
            for row, v in zip(coords.tolist(), values.tolist()):
                if not _is_zero(v):
                    store[tuple(int(c) for c in row)] = v
            return cls._trusted(sh, store)
        if coords.ndim != 2 or coords.shape[1] != sh.size:
            raise ShapeMismatch(f"expected rows of {sh.size} coordinates")
        keep = np.abs(values) >= PRUNE_TOL if values.dtype.kind in "fc" else values != 0
        rows = map(tuple, coords[keep].astype(np.int64).tolist())
        return cls._trusted(sh, dict(zip(rows, values[keep].tolist())))

    # access -----------------------------------------------------------------------
    @property
    def d(self) -> int:
        return self.shape.d

    def __call__(self, g) -> complex:
        return self._entries.get(_key(g, self.d), 0)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries))

    def items(self) -> list[tuple[tuple, object]]:
        return sorted(self._entries.items())

    @property
    def support(self) -> list[GroupElement]:
        return [GroupElement(self.shape, k) for k in sorted(self._entries)]

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(v) for v in self._entries.values())

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        keys = sorted(self._entries)
        values = np.array([self._entries[k] for k in keys], dtype=complex)
        try:
            coords = np.array(keys, dtype=np.int64).reshape(len(keys), self.shape.size)
        except OverflowError:
            return as_coord_array(keys, self.d), values
        if coords.size and np.abs(coords).max() >= _INT64_SAFE:
            return as_coord_array(keys, self.d), values
        return coords, values

    def total(self):
        return sum(v for _, v in self.items())

    # algebra ----------------------------------------------------------------------
    def _check(self, other: "SparseFunction"):
        if self.shape != other.shape:
            raise ShapeMismatch(f"functions on G0({self.d}) and G0({other.d})")

    def __add__(self, other: "SparseFunction") -> "SparseFunction":
        self._check(other)
        store = dict(self._entries)
        for k, v in other._entries.items():
            store[k] = store.get(k, 0) + v
        return SparseFunction._trusted(self.shape, {k: v for k, v in store.items() if not _is_zero(v)})

    def __neg__(self) -> "SparseFunction":
        return SparseFunction._trusted(self.shape, {k: -v for k, v in self._entries.items()})

    def __sub__(self, other: "SparseFunction") -> "SparseFunction":
        return self + (-other)

    def scale(self, c) -> "SparseFunction":
        return SparseFunction(self.shape, {k: c * v for k, v in self._entries.items()})

    __rmul__ = scale

    def conj(self) -> "SparseFunction":
        return SparseFunction._trusted(
            self.shape, {k: v if _is_exact(v) else complex(v).conjugate() for k, v in self._entries.items()}
        )

    def adjoint(self) -> "SparseFunction":
        """K*(g) = conj(K(g^-1)), the kernel of the adjoint of f -> f * K."""
        if not len(self) or self.is_exact:
            out = {}
            for k, v in self._entries.items():
                out[inverse(GroupElement(self.shape, k)).coords] = v
            return SparseFunction._trusted(self.shape, out)
        coords, values = self.arrays()
        return SparseFunction.from_arrays(self.shape, inv_arrays(coords, self.d), values.conj())

    def map_points(self, fn: Callable[[GroupElement], GroupElement]) -> "SparseFunction":
        return SparseFunction(
            self.shape, [(fn(GroupElement(self.shape, k)).coords, v) for k, v in self._entries.items()]
        )

    def allclose(self, other: "SparseFunction", atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self._entries) | set(other._entries)
        return all(abs(self(k) - other(k)) <= atol for k in keys)

    def max_abs(self) -> float:
        return max((abs(v) for v in self._entries.values()), default=0.0)

    # serialisation ----------------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for k, v in self.items():
            z = complex(v)
            lines.append(f"{GroupElement(self.shape, k).to_text()} → ({z.real!r},{z.imag!r})")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, d: int | None = None) -> "SparseFunction":
        entries = []
        for line in text.splitlines():
            if not line.strip():
                continue
            m = re.fullmatch(r"\s*(d=\d+:\[[^\]]*\])\s*(?:→|->)\s*\(([^,]+),([^)]+)\)\s*", line)
            if not m:
                raise ValueError(f"cannot parse line {line!r}")
            g = GroupElement.from_text(m.group(1))
            d = g.d if d is None else d
            entries.append((g.coords, complex(float(m.group(2)), float(m.group(3)))))
        if d is None:
            raise ValueError("empty text needs an explicit degree")
        return cls(d, entries)

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "index_set": [list(i) for i in self.shape.index_set],
                "entries": [
                    {"coords": list(k), "re": complex(v).real, "im": complex(v).imag} for k, v in self.items()
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SparseFunction":
        data = json.loads(text)
        return cls(data["d"], [(tuple(e["coords"]), complex(e["re"], e["im"])) for e in data["entries"]])

    def __repr__(self):
        return f"SparseFunction(d={self.d}, support={len(self)})"


# ---------------------------------------------------------------------------
# convolution

def _convolve_exact(f: SparseFunction, g: SparseFunction) -> SparseFunction:
    out: dict = {}
    fs, gs = f.items(), g.items()
    for yk, gv in gs:
        y = GroupElement(f.shape, yk)
        for zk, fv in fs:
            x = multiply(y, GroupElement(f.shape, zk)).coords
            out[x] = out.get(x, 0) + fv * gv
    return SparseFunction(f.shape, out)


def convolve(f: SparseFunction, g: SparseFunction, chunk: int = 4_000_000) -> SparseFunction:
    """(f * g)(x) = sum_y f(y^-1 x) g(y); support lies in {b a : a in supp f, b in supp g}."""
    f._check(g)
    if not len(f) or not len(g):
        return SparseFunction.zero(f.shape)
    if f.is_exact and g.is_exact:
        return _convolve_exact(f, g)
    d = f.d
    Z, fv = f.arrays()
    Y, gv = g.arrays()
    pts, vals = [], []
    rows = max(1, chunk // len(Z))
    for start in range(0, len(Y), rows):
        Yc = Y[start:start + rows]
        P = mul_arrays(Yc[:, None, :], Z[None, :, :], d).reshape(-1, Z.shape[1])
        pts.append(P)
        vals.append(np.outer(gv[start:start + rows], fv).ravel())
    P = np.concatenate(pts)
    V = np.concatenate(vals)
    if P.dtype == object:
        out: dict = {}
        for row, v in zip(P.tolist(), V.tolist()):
            key = tuple(int(c) for c in row)
            out[key] = out.get(key, 0) + v
        return SparseFunction(f.shape, out)
    uniq, summed = _accumulate(P, V)
    return SparseFunction.from_arrays(f.shape, uniq, summed)


def _accumulate(P: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows of the int64 array P with the sums of V over equal rows."""
    lo = P.min(axis=0)
    span = P.max(axis=0) - lo + 1
    if float(np.prod(span.astype(float))) < 2.0**62:
        radix = np.cumprod(np.concatenate([[1], span[:0:-1]]))[::-1]
        keys = (P - lo) @ radix
        ukeys, inv = np.unique(keys, return_inverse=True)
        uniq = np.empty((len(ukeys), P.shape[1]), dtype=np.int64)
        rest = ukeys
        for j in range(P.shape[1]):
            uniq[:, j], rest = np.divmod(rest, radix[j])
        uniq += lo
    else:
        uniq, inv = np.unique(P, axis=0, return_inverse=True)
    inv = inv.ravel()
    summed = np.bincount(inv, V.real, len(uniq)) + 1j * np.bincount(inv, V.imag, len(uniq))
    return uniq, summed


def convolve_at(f: SparseFunction, g: SparseFunction, x, form: int = 1):
    """Single value of f * g.  form=1 sums f(y^-1 x) g(y) over y, form=2 sums f(z) g(x z^-1) over z."""
    f._check(g)
    xe = x if isinstance(x, GroupElement) else GroupElement(f.shape, tuple(x))
    total = 0
    if form == 1:
        for yk, gv in g.items():
            total += f(multiply(inverse(GroupElement(f.shape, yk)), xe)) * gv
    elif form == 2:
        for zk, fv in f.items():
            total += fv * g(multiply(xe, inverse(GroupElement(f.shape, zk))))
    else:
        raise ValueError("form must be 1 or 2")
    return total


# ---------------------------------------------------------------------------
# averages along the moment curve

@dataclass(frozen=True)
class AverageParams:
    """Scale N (or N = tau^k) and cutoff chi of the smoothed moment-curve average."""

    shape: GroupShape
    N: float | None = None
    tau: float = 2.0
    k: int | None = None
    chi: CutoffFunction = field(default_factory=lambda: CutoffFunction("chi"))

    def __post_init__(self):
        if isinstance(self.shape, Integral):
            object.__setattr__(self, "shape", make_shape(self.shape))
        if not (1.0 < self.tau <= 2.0):
            raise ValueError(f"tau must lie in (1, 2], got {self.tau}")
        if self.N is None and self.k is None:
            raise ValueError("give either N or k")
        if self.N is not None and self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")

    @property
    def scale(self) -> float:
        return float(self.N) if self.N is not None else self.tau ** self.k

    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Integers n with nonzero weight N^-1 chi(n / N), and those weights."""
        N = self.scale
        R = math.floor(self.chi.support_radius * N)
        n = np.arange(-R, R + 1)
        w = self.chi(n / N) / N
        keep = w != 0
        return n[keep], w[keep]


def average_kernel(params: AverageParams) -> SparseFunction:
    """G(x) = sum_n N^-1 chi(n/N) 1_{A0(n)}(x)."""
    n, w = params.weights()
    d = params.shape.d
    return SparseFunction.from_arrays(params.shape, moment_curve_rows(n, d), w.astype(complex))


def moment_curve_rows(n: np.ndarray, d: int) -> np.ndarray:
    n = np.asarray(n)
    big = n.size and float(np.abs(n).max()) ** d >= 2**62
    n = n.astype(object) if big else n.astype(np.int64)
    cols = [n**l for l in range(1, d + 1)]
    cols += [np.zeros_like(n)] * make_shape(d).d_prime
    return np.stack(cols, axis=1) if n.size else np.zeros((0, make_shape(d).size), dtype=np.int64)


def apply_average(f: SparseFunction, params: AverageParams) -> SparseFunction:
    """M f(x) = sum_n N^-1 chi(n/N) f(A0(n)^-1 x), evaluated pointwise on its support."""
    n, w = params.weights()
    d = f.d
    A = moment_curve_rows(n, d)
    Ainv = inv_arrays(A, d)
    if not len(f):
        return SparseFunction.zero(f.shape)
    Z, _ = f.arrays()
    candidates = mul_arrays(A[:, None, :], Z[None, :, :], d).reshape(-1, Z.shape[1])
    if candidates.dtype == object:
        xs = sorted({tuple(int(c) for c in row) for row in candidates.tolist()})
    else:
        xs = [tuple(r) for r in np.unique(candidates, axis=0).tolist()]
    out = {}
    for x in xs:
        X = np.array(x, dtype=A.dtype)[None, :]
        pre = mul_arrays(Ainv, X, d)
        out[x] = sum(wi * f(tuple(row)) for wi, row in zip(w.tolist(), pre.tolist()))
    return SparseFunction(f.shape, out)


# ---------------------------------------------------------------------------
# TT* word kernels

def ttstar_kernel(Ls: Sequence[SparseFunction], Ks: Sequence[SparseFunction], r: int | None = None) -> SparseFunction:
    """Kernel of S_1* T_1 ... S_r* T_r, where S_j f = f * L_j and T_j f = f * K_j.

    A(y) = sum over words y = h_1^-1 g_1 h_2^-1 g_2 ... h_r^-1 g_r of
    prod_j conj(L_j(h_j)) K_j(g_j).
    """
    r = len(Ks) if r is None else r
    if r < 1 or len(Ls) < r or len(Ks) < r:
        raise ValueError("need r >= 1 kernels of each kind")
    sh = Ks[0].shape
    factors = [F for L, K in zip(Ls[:r], Ks[:r]) for F in (L.adjoint(), K)]
    if all(F.is_exact for F in factors):
        return _ttstar_dict(sh, factors)
    W = np.zeros((1, sh.size), dtype=np.int64)
    wv = np.ones(1, dtype=complex)
    for factor in factors:
        if not len(factor):
            return SparseFunction.zero(sh)
        G, gv = factor.arrays()
        P = mul_arrays(W[:, None, :], G[None, :, :], sh.d).reshape(-1, sh.size)
        V = np.outer(wv, gv).ravel()
        if P.dtype == object:
            return _ttstar_dict(sh, factors)
        W, wv = _accumulate(P, V)
    return SparseFunction.from_arrays(sh, W, wv)


def _ttstar_dict(sh: GroupShape, factors: list[SparseFunction]) -> SparseFunction:
    words: dict = {tuple([0] * sh.size): 1}
    for factor in factors:
        nxt: dict = {}
        fitems = factor.items()
        for wk, wv in words.items():
            we = GroupElement(sh, wk)
            for gk, gv in fitems:
                key = multiply(we, GroupElement(sh, gk)).coords
                nxt[key] = nxt.get(key, 0) + wv * gv
        words = {k: v for k, v in nxt.items() if not _is_zero(v)}
    return SparseFunction(sh, words)


# ---------------------------------------------------------------------------
# norms

def lp_norm(f: SparseFunction, p: float = 2.0) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals = np.array([abs(complex(v)) for _, v in f.items()], dtype=float)
    if vals.size == 0:
        return 0.0
    if math.isinf(p):
        return float(vals.max())
    return float(np.sum(vals**p) ** (1.0 / p))


def inner(f: SparseFunction, g: SparseFunction) -> complex:
    """<f, g> = sum_x f(x) conj(g(x))."""
    f._check(g)
    small, big = (f, g) if len(f) <= len(g) else (g, f)
    total = 0j
    for k, _ in small.items():
        total += complex(f(k)) * complex(g(k)).conjugate()
    return total
