"""Reduced fractions mod 1 and the periodic rational sets used by the circle method.

Every set here is a union of "all reduced a/q with a fixed denominator q", so a
set is stored as its set of denominators.  R_s^m (denominators in
[tau^s, tau^(s+1))) and the full lattice {a/Q} (denominators dividing Q) are
both of this form, and so are their unions and differences.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

__all__ = [
    "RationalVector",
    "RationalSet",
    "divisors",
    "mobius",
    "jordan_totient",
    "ramanujan_sum",
    "enumerate_rationals",
    "denominator_range",
    "lcm_upto",
    "factorial_denominator",
    "kappa",
]


@lru_cache(maxsize=4096)
def divisors(n: int) -> tuple[int, ...]:
    small = [i for i in range(1, math.isqrt(n) + 1) if n % i == 0]
    return tuple(sorted(set(small + [n // i for i in small])))


@lru_cache(maxsize=4096)
def _prime_factors(n: int) -> tuple[int, ...]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return tuple(out)


def mobius(n: int) -> int:
    if n == 1:
        return 1
    m, count = n, 0
    for p in _prime_factors(n):
        m //= p
        if m % p == 0:
            return 0
        count += 1
    return -1 if count % 2 else 1


def jordan_totient(q: int, m: int) -> int:
    """Number of a in (Z/q)^m with gcd(a_1, ..., a_m, q) = 1."""
    out = q**m
    for p in _prime_factors(q):
        out = out // p**m * (p**m - 1)
    return out


def ramanujan_sum(q: int, v: np.ndarray, m: int) -> np.ndarray:
    """sum over reduced a/q in (Z/q)^m of e(v . a/q), for integer rows v (exact).

    Mobius inversion over gcd(a, q) gives sum_{e | q} mu(q/e) e^m [e divides every v_i].
    """
    v = np.asarray(v)
    if v.ndim == 1:
        v = v.reshape(-1, 1) if m == 1 else v[None, :]
    out = np.zeros(v.shape[:-1], dtype=np.int64 if q**m < 2**62 else object)
    for e in divisors(q):
        mu = mobius(q // e)
        if mu == 0:
            continue
        hit = np.all(v % e == 0, axis=-1) if m else np.ones(v.shape[:-1], bool)
        out = out + mu * e**m * hit
    return out


def denominator_range(s: int, tau: float) -> range:
    """Integers q with tau^s <= q < tau^(s+1)."""
    lo = math.ceil(tau**s - 1e-9)
    hi = math.ceil(tau ** (s + 1) - 1e-9)
    return range(max(lo, 1), hi)


def lcm_upto(L: int) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), range(1, L + 1), 1)


def factorial_denominator(s: int, D: float, tau: float, limit: int = 20) -> int:
    """floor(tau^(D(s+1)))!, only for arguments small enough to be useful."""
    n = math.floor(tau ** (D * (s + 1)) + 1e-9)
    if n > limit:
        raise OverflowError(f"({n})! is far beyond any grid; use a highly divisible stand-in")
    return math.factorial(n)


def kappa(s: int, D: float, tau: float) -> float:
    try:
        return 2.0 ** ((D / math.log(tau)) * (s + 1) ** 2)
    except OverflowError:
        return math.inf


@dataclass(frozen=True, order=True)
class RationalVector:
    """a/q mod 1 with gcd(a_1, ..., a_m, q) = 1; numerators stored in [0, q)."""

    numerators: tuple
    denominator: int

    def __post_init__(self):
        q = int(self.denominator)
        if q < 1:
            raise ValueError(f"denominator must be positive, got {q}")
        nums = tuple(int(a) % q for a in self.numerators)
        g = reduce(math.gcd, nums, q)
        object.__setattr__(self, "numerators", tuple(a // g for a in nums))
        object.__setattr__(self, "denominator", q // g)

    @classmethod
    def of(cls, numerators: Sequence[int], denominator: int) -> "RationalVector":
        return cls(tuple(numerators), denominator)

    @property
    def dim(self) -> int:
        return len(self.numerators)

    @property
    def reduced(self) -> bool:
        return True

    def as_fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(a, self.denominator) for a in self.numerators)

    def as_floats(self) -> np.ndarray:
        return np.array(self.numerators, dtype=float) / self.denominator

    def lift(self, Q: int) -> tuple[int, ...]:
        """Numerators over a multiple Q of the denominator."""
        if Q % self.denominator:
            raise ValueError(f"{Q} is not a multiple of {self.denominator}")
        return tuple(a * (Q // self.denominator) for a in self.numerators)

    def __str__(self):
        return "(" + ", ".join(f"{a}/{self.denominator}" for a in self.numerators) + ")"


@dataclass(frozen=True)
class RationalSet:
    """1-periodic set {a/q reduced : q in denominators} in dimension m."""

    m: int
    denominators: frozenset = field(default_factory=frozenset)
    label: str = ""

    @classmethod
    def farey(cls, m: int, s: int, tau: float = 2.0) -> "RationalSet":
        return cls(m, frozenset(denominator_range(s, tau)), f"R_{s}^{m}")

    @classmethod
    def farey_upto(cls, m: int, a: float, tau: float = 2.0) -> "RationalSet":
        dens = set()
        for s in range(0, math.floor(a) + 1):
            dens.update(denominator_range(s, tau))
        return cls(m, frozenset(dens), f"R_<={a}^{m}")

    @classmethod
    def fixed_denominator(cls, m: int, Q: int) -> "RationalSet":
        return cls(m, frozenset(divisors(Q)), f"Rt_{Q}^{m}")

    @classmethod
    def empty(cls, m: int) -> "RationalSet":
        return cls(m, frozenset(), "empty")

    def _check(self, other: "RationalSet"):
        if self.m != other.m:
            raise ValueError("rational sets of different dimensions")

    def __or__(self, other: "RationalSet") -> "RationalSet":
        self._check(other)
        return RationalSet(self.m, self.denominators | other.denominators, f"({self.label}|{other.label})")

    def __sub__(self, other: "RationalSet") -> "RationalSet":
        self._check(other)
        return RationalSet(self.m, self.denominators - other.denominators, f"({self.label}\\{other.label})")

    def __and__(self, other: "RationalSet") -> "RationalSet":
        self._check(other)
        return RationalSet(self.m, self.denominators & other.denominators, f"({self.label}&{other.label})")

    def __contains__(self, r: RationalVector) -> bool:
        return r.dim == self.m and r.denominator in self.denominators

    def __len__(self) -> int:
        return sum(jordan_totient(q, self.m) for q in self.denominators)

    @property
    def max_denominator(self) -> int:
        return max(self.denominators, default=0)

    def is_compatible(self, Q: int) -> bool:
        """True when every element is of the form a/Q."""
        return all(Q % q == 0 for q in self.denominators)

    def enumerate(self) -> list[RationalVector]:
        return enumerate_rationals(self)

    def exp_sum(self, v) -> np.ndarray:
        """sum over sigma in the set (one period) of e(v . sigma), exact, for integer rows v."""
        v = np.asarray(v)
        if v.ndim == 1:
            v = v.reshape(-1, 1) if self.m == 1 else v[None, :]
        total = np.zeros(v.shape[:-1], dtype=np.int64)
        for q in sorted(self.denominators):
            total = total + ramanujan_sum(q, v, self.m)
        return total

    def centers(self) -> np.ndarray:
        rs = self.enumerate()
        if not rs:
            return np.zeros((0, self.m))
        return np.array([r.as_floats() for r in rs])


def enumerate_rationals(rset: RationalSet) -> list[RationalVector]:
    """All reduced representatives in [0, 1)^m, sorted by value."""
    out = []
    for q in sorted(rset.denominators):
        for a in itertools.product(range(q), repeat=rset.m):
            if math.gcd(*a, q) == 1:
                out.append(RationalVector(a, q))
    out.sort(key=lambda r: r.as_fractions())
    return out
