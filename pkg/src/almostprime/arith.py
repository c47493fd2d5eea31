"""Exact integer kernel: primes, factorization, Moebius, primorials, roughness."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Iterator, List, Tuple

import numpy as np

from .errors import ValidationError


# ---------------------------
# Prime tables
# ---------------------------

def sieve_primes_upto(n: int) -> List[int]:
    if n < 2:
        return []
    bs = bytearray(b"\x01") * (n + 1)
    bs[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(n) + 1):
        if bs[p]:
            bs[p * p :: p] = b"\x00" * (((n - p * p) // p) + 1)
    return [i for i in range(2, n + 1) if bs[i]]


@dataclass(frozen=True)
class PrimeTable:
    """All primes up to ``limit``, ascending. Immutable, shareable."""

    limit: int
    primes: Tuple[int, ...] = field(repr=False)

    @classmethod
    def upto(cls, limit: int) -> "PrimeTable":
        if limit < 1:
            raise ValidationError("PrimeTable limit must be positive")
        return cls(limit, tuple(sieve_primes_upto(limit)))

    def __contains__(self, x: int) -> bool:
        i = bisect.bisect_left(self.primes, x)
        return i < len(self.primes) and self.primes[i] == x

    def __iter__(self) -> Iterator[int]:
        return iter(self.primes)

    def __len__(self) -> int:
        return len(self.primes)

    def upto_value(self, x: float) -> Tuple[int, ...]:
        return self.primes[: bisect.bisect_right(self.primes, x)]


_TABLE = PrimeTable.upto(10**6)


def prime_table(limit: int) -> PrimeTable:
    """Shared table if large enough, else a fresh one."""
    if limit <= _TABLE.limit:
        return _TABLE
    return PrimeTable.upto(limit)


def primes_upto(x: float) -> Tuple[int, ...]:
    return prime_table(max(1, int(x))).upto_value(x)


def primes_between(lo: float, hi: float) -> List[int]:
    """Primes p with lo < p < hi."""
    return [p for p in primes_upto(math.ceil(hi)) if lo < p < hi]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n <= _TABLE.limit:
        return n in _TABLE
    for p in _TABLE.primes:
        if p * p > n:
            return True
        if n % p == 0:
            return False
    return factorize(n).factors == ((n, 1),)


def require_prime(p: int) -> None:
    if not is_prime(p):
        raise ValidationError(f"{p} is not prime")


# ---------------------------
# Factorization
# ---------------------------

@dataclass(frozen=True)
class Factorization:
    value: int
    factors: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        prod = 1
        for p, e in self.factors:
            if e < 1:
                raise ValidationError("exponents must be >= 1")
            prod *= p**e
        if prod != self.value:
            raise ValidationError("factorization does not multiply out")

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    @property
    def squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factors)

    @property
    def rad(self) -> int:
        return math.prod(self.primes)


@lru_cache(maxsize=1 << 16)
def factorize(n: int) -> Factorization:
    """Trial division by the cached table; fine for n up to ~10^12."""
    if n < 1:
        raise ValidationError(f"factorize needs n >= 1, got {n}")
    m = n
    out = []
    for p in _TABLE.primes:
        if p * p > m:
            break
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
    else:
        if m > 1 and _TABLE.primes[-1] ** 2 < m:
            # beyond the table: continue with odd trial divisors
            d = _TABLE.primes[-1] + 2
            while d * d <= m:
                if m % d == 0:
                    e = 0
                    while m % d == 0:
                        m //= d
                        e += 1
                    out.append((d, e))
                d += 2
    if m > 1:
        out.append((m, 1))
    return Factorization(n, tuple(out))


def smallest_prime_factor(n: int) -> int:
    """Smallest prime factor; 1 has none and returns 0."""
    if n == 1:
        return 0
    return factorize(n).factors[0][0]


def mobius(n: int) -> int:
    fac = factorize(n)
    if not fac.squarefree:
        return 0
    return -1 if len(fac.factors) % 2 else 1


def rad(n: int) -> int:
    return factorize(n).rad


def euler_phi(n: int) -> int:
    out = n
    for p in factorize(n).primes:
        out = out // p * (p - 1)
    return out


def is_squarefree(n: int) -> bool:
    return factorize(n).squarefree


def squarefree_divisors(n: int) -> List[Tuple[int, int]]:
    """Pairs (d, mu(d)) for every squarefree d | n."""
    ps = factorize(n).primes
    out = []
    for k in range(len(ps) + 1):
        sign = -1 if k % 2 else 1
        for c in combinations(ps, k):
            out.append((math.prod(c), sign))
    return out


def divisors(n: int) -> List[int]:
    ds = [1]
    for p, e in factorize(n).factors:
        ds = [d * p**i for d in ds for i in range(e + 1)]
    return sorted(ds)


def primorial(omega: int) -> int:
    """Product of all primes <= omega (1 for omega < 2)."""
    if omega < 1:
        raise ValidationError("primorial needs omega >= 1")
    return math.prod(primes_upto(omega))


def is_rough(x: int, bound: float) -> bool:
    """Every prime divisor of x is >= bound. x = 1 is vacuously rough."""
    if x < 1:
        raise ValidationError("is_rough needs x >= 1")
    if x == 1:
        return True
    return smallest_prime_factor(x) >= bound


def coprime_to_W(values: Iterable[int], W: int) -> bool:
    if W < 1:
        raise ValidationError("W must be >= 1")
    return all(math.gcd(abs(int(v)), W) == 1 for v in values)


# ---------------------------
# Vectorised tables
# ---------------------------

def mobius_table(limit: int) -> np.ndarray:
    """mu(0..limit) as int8 array (mu(0) := 0)."""
    mu = np.ones(limit + 1, dtype=np.int8)
    mu[0] = 0
    for p in primes_upto(limit):
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def lpf_table(limit: int) -> np.ndarray:
    """Smallest prime factor for 0..limit (0 for 0 and 1)."""
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in reversed(primes_upto(limit)):
        spf[p::p] = p
    return spf


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> int:
    """x mod m1*m2 with x = r1 (m1), x = r2 (m2); moduli coprime."""
    if math.gcd(m1, m2) != 1:
        raise ValidationError("CRT moduli must be coprime")
    t = ((r2 - r1) * pow(m1, -1, m2)) % m2
    return (r1 + m1 * t) % (m1 * m2)
