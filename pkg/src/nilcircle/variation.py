"""rho-variation seminorms of finite indexed sequences.

V^rho(a) = sup over t_0 < t_1 < ... < t_J in I of (sum_j |a_{t_{j+1}} - a_{t_j}|^rho)^(1/rho),
computed exactly by an O(n^2) dynamic program over the last chosen index.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "IndexedSequence",
    "variation",
    "variation_tilde",
    "variation_exhaustive",
    "sup_norm",
    "rademacher_menshov_rhs",
    "variation_profile",
    "variation_columns",
]


@dataclass(frozen=True)
class IndexedSequence:
    """Values a_t on a strictly increasing finite index set I."""

    indices: tuple
    values: tuple

    def __post_init__(self):
        idx = tuple(self.indices)
        vals = tuple(self.values)
        if len(idx) != len(vals):
            raise ValueError(f"{len(idx)} indices but {len(vals)} values")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if not all(math.isfinite(abs(v)) for v in vals):
            raise ValueError("values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values: Sequence, indices: Sequence | None = None) -> "IndexedSequence":
        values = list(values)
        return cls(tuple(range(len(values))) if indices is None else tuple(indices), tuple(values))

    def __len__(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex if any(isinstance(v, complex) for v in self.values) else float)

    def restrict(self, lo, hi) -> "IndexedSequence":
        """The subsequence with lo <= t <= hi."""
        keep = [(t, v) for t, v in zip(self.indices, self.values) if lo <= t <= hi]
        return IndexedSequence(tuple(t for t, _ in keep), tuple(v for _, v in keep))

    def __add__(self, other: "IndexedSequence") -> "IndexedSequence":
        if self.indices != other.indices:
            raise ValueError("sequences live on different index sets")
        return IndexedSequence(self.indices, tuple(a + b for a, b in zip(self.values, other.values)))


def _as_sequence(seq) -> IndexedSequence:
    return seq if isinstance(seq, IndexedSequence) else IndexedSequence.of(seq)


def _check_rho(rho: float):
    if not rho >= 1:
        raise ValueError(f"rho must be >= 1, got {rho}")


def sup_norm(seq) -> float:
    """sup_t |a_t|; this is what a request for rho = infinity returns."""
    a = _as_sequence(seq).array()
    return float(np.max(np.abs(a))) if a.size else 0.0


def variation(seq, rho: float) -> float:
    """Exact V^rho by dynamic programming.

    best[j] is the largest sum of rho-th powers of jumps over chains ending at
    index j; a lone point has sum 0.  ``rho = inf`` is not a variation and is
    refused; call ``sup_norm`` for that.
    """
    if rho == math.inf:
        raise ValueError("rho = inf is not a variation exponent; use sup_norm")
    _check_rho(rho)
    a = _as_sequence(seq).array()
    n = a.size
    if n < 2:
        return 0.0
    best = np.zeros(n)
    for j in range(1, n):
        jumps = np.abs(a[j] - a[:j]) ** rho
        best[j] = max(0.0, float(np.max(best[:j] + jumps)))
    return float(best.max() ** (1.0 / rho))


def variation_exhaustive(seq, rho: float) -> float:
    """V^rho by trying every subsequence; only for short sequences (n <= 16)."""
    _check_rho(rho)
    a = _as_sequence(seq).array()
    n = a.size
    if n > 16:
        raise ValueError(f"exhaustive enumeration over 2^{n} subsequences is too large")
    top = 0.0
    for size in range(2, n + 1):
        for chain in itertools.combinations(range(n), size):
            vals = a[list(chain)]
            top = max(top, float(np.sum(np.abs(np.diff(vals)) ** rho)))
    return top ** (1.0 / rho)


def variation_tilde(seq, rho: float) -> float:
    """sup_t |a_t| + V^rho(a); a norm, unlike V^rho alone."""
    return sup_norm(seq) + variation(seq, rho)


def rademacher_menshov_rhs(seq, j0: int, m: int) -> float:
    """sqrt(2) sum_{i=0}^m (sum_j |a_{(j+1)2^i} - a_{j 2^i}|^2)^(1/2), j 2^i >= j0, (j+1) 2^i <= 2^m.

    ``seq`` maps integer times to values; it must contain every integer in [j0, 2^m].
    """
    s = _as_sequence(seq)
    top = 2**m
    if not 0 <= j0 < top:
        raise ValueError(f"need 0 <= j0 < 2^m, got j0={j0}, m={m}")
    table = dict(zip(s.indices, s.values))
    missing = [t for t in range(j0, top + 1) if t not in table]
    if missing:
        raise ValueError(f"sequence is not defined at t={missing[0]}")
    total = 0.0
    for i in range(m + 1):
        step = 2**i
        first = -(-j0 // step)
        sq = 0.0
        for j in range(first, top // step):
            sq += abs(table[(j + 1) * step] - table[j * step]) ** 2
        total += math.sqrt(sq)
    return math.sqrt(2.0) * total


def variation_profile(seq, rhos: Sequence[float]) -> list[tuple[float, float]]:
    """(rho, V^rho) rows, the data behind a variation CSV."""
    return [(float(r), variation(seq, r)) for r in rhos]


def variation_columns(values: np.ndarray, rho: float) -> np.ndarray:
    """V^rho of every column of a (times, points) array, same recursion as ``variation``."""
    if rho == math.inf:
        raise ValueError("rho = inf is not a variation exponent; use sup_norm")
    _check_rho(rho)
    a = np.asarray(values)
    if a.ndim != 2:
        raise ValueError("expected a (times, points) array")
    n = a.shape[0]
    best = np.zeros(a.shape, dtype=float)
    for j in range(1, n):
        cand = best[:j] + np.abs(a[j] - a[:j]) ** rho
        best[j] = np.maximum(cand.max(axis=0), 0.0)
    return best.max(axis=0) ** (1.0 / rho) if n else np.zeros(a.shape[1])
