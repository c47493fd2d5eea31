"""Local densities at a prime p, all as exact rationals.

sigma_p^l(D, s, v) = p^{-l(n-r)} |{x in Z_{p^l}^n : F(Dx + s) = v mod p^l}|

Counting goes through one of three routes:

* brute force over the residue box (the oracle),
* a fiber reduction: if p^a || D only x mod p^{l-a} matters,
* a convolution path for single diagonal forms sum a_i x_i^k, with optional
  per-coordinate unit restrictions.

The nonsingular shortcut sigma_p^l(p, s, v) = p^r needs no counting at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .arith import factorize, require_prime
from .errors import ValidationError, check_budget
from .forms import FormSystem, LinearFamily, as_target, evaluate, jacobian_mod_p
from .grid import residue_grid


@dataclass(frozen=True)
class LocalDensity:
    value: Fraction
    p: int
    level: int
    stabilized: bool = False
    route: str = ""

    def __float__(self) -> float:
        return float(self.value)

    def to_json(self) -> dict:
        return {
            "value": str(self.value),
            "float": float(self.value),
            "p": self.p,
            "level": self.level,
            "stabilized": self.stabilized,
            "route": self.route,
        }


@dataclass(frozen=True)
class EulerFactor:
    value: Fraction
    p: int
    level: int

    def __float__(self) -> float:
        return float(self.value)

    def to_json(self) -> dict:
        return {"value": str(self.value), "float": float(self.value), "p": self.p, "level": self.level}


def _normalizer(F: FormSystem, p: int, l: int) -> Fraction:
    """p^{-l(n-r)} as a Fraction (n < r allowed)."""
    return Fraction(p ** (l * F.r), p ** (l * F.n))


def _vp(D: int, p: int) -> int:
    a = 0
    while D % p == 0:
        D //= p
        a += 1
    return a


def _unit_coords(L: Optional[LinearFamily]) -> Optional[List[int]]:
    """Coordinates j when every l_i is x_j; None if L is not of that shape."""
    if L is None:
        return []
    out = []
    for row in L.matrix:
        nz = [j for j, a in enumerate(row) if a]
        if len(nz) != 1:
            return None
        out.append(nz[0])
    return out


def _diagonal_coeffs(F: FormSystem) -> Optional[List[int]]:
    """a_i if F is one form sum a_i x_i^k, else None."""
    if F.r != 1:
        return None
    coeffs = [0] * F.n
    for c, e in F.forms[0]:
        nz = [j for j, x in enumerate(e) if x]
        if len(nz) != 1:
            return None
        coeffs[nz[0]] = c
    return coeffs


# ---------------------------
# Counting kernels
# ---------------------------

def _count_brute(
    F: FormSystem,
    v: Sequence[int],
    M: int,
    D: int,
    s: Sequence[int],
    box: int,
    L: Optional[LinearFamily] = None,
    p_unit: Optional[int] = None,
    budget: Optional[int] = None,
) -> int:
    """#{x in Z_box^n : F(Dx+s) = v mod M [, p does not divide any l_i(Dx+s)]}."""
    check_budget("residue enumeration", box**F.n, budget)
    tgt = np.asarray([a % M for a in v], dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    total = 0
    for X in residue_grid(box, F.n):
        Y = (D * X + s) % M
        hit = (F.evaluate_many(Y, M) == tgt).all(axis=1)
        if L is not None and L.m and p_unit is not None:
            hit &= (L.values_many(Y) % p_unit != 0).all(axis=1)
        total += int(hit.sum())
    return total


def _cyclic_convolve(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    full = np.convolve(a, b)
    out = full[:M].copy()
    out[: len(full) - M] += full[M:]
    return out


def _count_diagonal(
    coeffs: Sequence[int],
    k: int,
    v: int,
    M: int,
    D: int,
    s: Sequence[int],
    box: int,
    unit_coords: Sequence[int] = (),
    p_unit: Optional[int] = None,
) -> int:
    """#{x in Z_box^n : sum a_i (D x_i + s_i)^k = v mod M} by convolving value counts."""
    n = len(coeffs)
    units = set(unit_coords) if p_unit is not None else set()
    use_obj = box**n >= 2**62
    dist = np.zeros(M, dtype=object if use_obj else np.int64)
    dist[0] = 1
    xs = np.arange(box, dtype=np.int64)
    for j, a in enumerate(coeffs):
        y = (D * xs + s[j]) % M
        if j in units:
            y = y[y % p_unit != 0]
        vals = np.ones(len(y), dtype=np.int64) * (a % M)
        for _ in range(k):
            vals = (vals * y) % M
        h = np.bincount(vals, minlength=M).astype(dist.dtype)
        dist = _cyclic_convolve(dist, h, M)
    return int(dist[v % M])


def count_mod(
    F: FormSystem,
    v: Sequence[int],
    p: int,
    l: int,
    D: int = 1,
    s: Optional[Sequence[int]] = None,
    L: Optional[LinearFamily] = None,
    unit_prime: bool = False,
    method: str = "auto",
    budget: Optional[int] = None,
) -> Tuple[int, str]:
    """#{x in Z_{p^l}^n : F(Dx+s) = v mod p^l} (optionally with p not dividing l_i(Dx+s)).

    Returns the count and the route used.
    """
    M = p**l
    s = [0] * F.n if s is None else [int(a) for a in s]
    if len(s) != F.n:
        raise ValidationError("s has the wrong length")
    a = min(_vp(D, p), l)
    p_unit = p if unit_prime else None
    if method == "brute":
        return _count_brute(F, v, M, D, s, M, L, p_unit, budget), "brute"
    # Dx mod p^l depends only on x mod p^{l-a}; each class has p^{a n} lifts
    box = p ** (l - a)
    lift = p ** (a * F.n)
    diag = _diagonal_coeffs(F)
    units = _unit_coords(L if unit_prime else None)
    if method in ("auto", "diagonal") and diag is not None and units is not None:
        cnt = _count_diagonal(diag, F.k, v[0], M, D, s, box, units, p_unit)
        return cnt * lift, "diagonal"
    if method == "diagonal":
        raise ValidationError("diagonal route needs a single diagonal form and coordinate linear forms")
    return _count_brute(F, v, M, D, s, box, L, p_unit, budget) * lift, "fiber"


# ---------------------------
# Densities
# ---------------------------

def sigma_p_l(
    F: FormSystem,
    v,
    p: int,
    l: int,
    D: int = 1,
    s: Optional[Sequence[int]] = None,
    method: str = "auto",
    budget: Optional[int] = None,
) -> LocalDensity:
    require_prime(p)
    if l < 0:
        raise ValidationError("level must be >= 0")
    if D < 1:
        raise ValidationError("D must be >= 1")
    v = as_target(v, F)
    if l == 0:
        return LocalDensity(Fraction(1), p, 0, False, "trivial")
    cnt, route = count_mod(F, v, p, l, D, s, method=method, budget=budget)
    return LocalDensity(cnt * _normalizer(F, p, l), p, l, False, route)


def sigma_p_stabilized(
    F: FormSystem,
    v,
    p: int,
    D: int = 1,
    s: Optional[Sequence[int]] = None,
    l_max: int = 4,
    method: str = "auto",
    budget: Optional[int] = None,
) -> LocalDensity:
    """sigma_p^l for l = 1, 2, ... until two consecutive levels agree."""
    prev = None
    for l in range(1, l_max + 1):
        cur = sigma_p_l(F, v, p, l, D, s, method, budget)
        if prev is not None and cur.value == prev.value:
            return LocalDensity(cur.value, p, l, True, cur.route)
        prev = cur
    return LocalDensity(prev.value, p, prev.level, False, prev.route)


def sigma_star_p(
    F: FormSystem,
    L: LinearFamily,
    v,
    p: int,
    l: int,
    method: str = "auto",
    budget: Optional[int] = None,
) -> LocalDensity:
    """(p/(p-1))^m p^{-l(n-r)} #{x mod p^l : F(x) = v, p does not divide any l_i(x)}."""
    require_prime(p)
    v = as_target(v, F)
    if L.n != F.n:
        raise ValidationError("linear family and form system disagree on n")
    cnt, route = count_mod(F, v, p, l, L=L, unit_prime=True, method=method, budget=budget)
    val = Fraction(p, p - 1) ** L.m * cnt * _normalizer(F, p, l)
    return LocalDensity(val, p, l, False, route)


def is_nonsingular(F: FormSystem, s: Sequence[int], p: int) -> bool:
    return jacobian_mod_p(F, s, p)[1] == F.r


def hybrid_sigma(
    F: FormSystem,
    v,
    p: int,
    s: Sequence[int],
    l: int = 2,
    stabilize: bool = False,
    budget: Optional[int] = None,
) -> LocalDensity:
    """sigma_p^l(p, s, v): p^r at nonsingular s, fiber counting otherwise."""
    require_prime(p)
    v = as_target(v, F)
    s = [int(a) for a in s]
    if [x % p for x in evaluate(F, s)] != [a % p for a in v]:
        return LocalDensity(Fraction(0), p, l, True, "off-fiber")
    if is_nonsingular(F, s, p):
        return LocalDensity(Fraction(p**F.r), p, l, True, "nonsingular")
    if stabilize:
        return sigma_p_stabilized(F, v, p, p, s, l_max=l, budget=budget)
    return sigma_p_l(F, v, p, l, p, s, budget=budget)


# ---------------------------
# Euler factors
# ---------------------------

def _fiber_scan(F: FormSystem, L: Optional[LinearFamily], v, p: int):
    """Yield (points on F = v mod p, divisible mask, singular mask) chunks."""
    tgt = np.asarray([a % p for a in v], dtype=np.int64)
    for X in residue_grid(p, F.n):
        on = (F.evaluate_many(X, p) == tgt).all(axis=1)
        if not on.any():
            continue
        Y = X[on]
        if L is not None and L.m:
            div = (L.values_many(Y) % p == 0).any(axis=1)
        else:
            div = np.zeros(len(Y), dtype=bool)
        yield Y, div, F.singular_mask(Y, p)


def gamma_p_parts(
    F: FormSystem,
    L: LinearFamily,
    v,
    p: int,
    l: int = 2,
    budget: Optional[int] = None,
) -> dict:
    """Pieces of gamma_p at inner level l, following the nonsingular/singular split.

    Returns exact rationals: sigma (= sigma_p^l(v)), the numerator sum
    p^{-n} sum 1_{p | prod l_i(s)} sigma_p^l(p, s, v), and its nonsingular and
    singular contributions, plus the singular point count.
    """
    require_prime(p)
    v = as_target(v, F)
    check_budget("gamma_p outer residue sum", p**F.n, budget)
    pr = Fraction(p**F.r)
    n_ns_all = n_ns_div = 0
    sing_all = Fraction(0)
    sing_div = Fraction(0)
    n_sing = 0
    for Y, div, sing in _fiber_scan(F, L, v, p):
        n_ns_all += int((~sing).sum())
        n_ns_div += int((~sing & div).sum())
        for row, d in zip(Y[sing].tolist(), div[sing].tolist()):
            val = sigma_p_l(F, v, p, l, p, row, budget=budget).value
            n_sing += 1
            sing_all += val
            if d:
                sing_div += val
    pn = Fraction(1, p**F.n)
    sigma = pn * (n_ns_all * pr + sing_all)
    numer_ns = pn * n_ns_div * pr
    numer_sing = pn * sing_div
    return {
        "sigma": sigma,
        "numerator": numer_ns + numer_sing,
        "nonsingular": numer_ns,
        "singular": numer_sing,
        "singular_points": n_sing,
    }


def gamma_p(
    F: FormSystem,
    L: LinearFamily,
    v,
    p: int,
    l: int = 2,
    budget: Optional[int] = None,
) -> EulerFactor:
    """p^{-n}/sigma_p(v) * sum_{F(s)=v mod p} 1_{p | l_1(s)...l_m(s)} sigma_p(p, s, v)."""
    parts = gamma_p_parts(F, L, v, p, l, budget)
    if parts["sigma"] == 0:
        raise ValidationError(f"sigma_p(v) vanishes at p = {p}; gamma_p undefined")
    return EulerFactor(parts["numerator"] / parts["sigma"], p, l)


def gamma_p_brute(F: FormSystem, L: LinearFamily, v, p: int, l: int = 2, budget: Optional[int] = None) -> Fraction:
    """Oracle: every inner sigma by full enumeration of Z_{p^l}^n."""
    require_prime(p)
    v = as_target(v, F)
    sigma = sigma_p_l(F, v, p, l, method="brute", budget=budget).value
    tgt = [a % p for a in v]
    total = Fraction(0)
    for X in residue_grid(p, F.n):
        for row in X.tolist():
            if [x % p for x in evaluate(F, row)] != tgt:
                continue
            if L.m and not any(val % p == 0 for val in L.values(row)):
                continue
            total += sigma_p_l(F, v, p, l, p, row, method="brute", budget=budget).value
    if sigma == 0:
        raise ValidationError("sigma_p(v) vanishes")
    return total / p**F.n / sigma


def gamma_D(
    F: FormSystem,
    L: LinearFamily,
    v,
    D: int,
    level: int = 2,
    budget: Optional[int] = None,
) -> Fraction:
    """Product of gamma_p over p | D (D squarefree)."""
    fac = factorize(D)
    if not fac.squarefree:
        raise ValidationError(f"D = {D} is not squarefree")
    out = Fraction(1)
    for p in fac.primes:
        out *= gamma_p(F, L, v, p, level, budget).value
    return out


def gamma_D_direct(
    F: FormSystem,
    L: LinearFamily,
    v,
    D: int,
    level: int = 2,
    budget: Optional[int] = None,
) -> Fraction:
    """Oracle: D^{-n} sum over s in Z_D^n with F(s) = v mod D and D | l_1(s)...l_m(s)
    of prod_{p|D} sigma_p(p, s, v)/sigma_p(v)."""
    fac = factorize(D)
    if not fac.squarefree:
        raise ValidationError(f"D = {D} is not squarefree")
    v = as_target(v, F)
    check_budget("gamma_D direct sum", D**F.n, budget)
    sig = {p: sigma_p_l(F, v, p, level, budget=budget).value for p in fac.primes}
    tgt = [a % D for a in v]
    total = Fraction(0)
    for X in residue_grid(D, F.n):
        for row in X.tolist():
            if [x % D for x in evaluate(F, row)] != tgt:
                continue
            prod_l = math.prod(L.values(row)) if L.m else 1
            if prod_l % D:
                continue
            term = Fraction(1)
            for p in fac.primes:
                term *= sigma_p_l(F, v, p, level, p, [x % p for x in row], budget=budget).value / sig[p]
            total += term
    return total / D**F.n


def aggregate_sigma_star(F: FormSystem, L: LinearFamily, v, p: int, l: int, budget: Optional[int] = None) -> Fraction:
    """p^{m-n}/(p-1)^m sum_{b mod p, (L(b),p)=1} sigma_p^l(p, b, v); equals sigma*_p at level l."""
    v = as_target(v, F)
    total = Fraction(0)
    for X in residue_grid(p, F.n):
        for row in X.tolist():
            if L.m and any(val % p == 0 for val in L.values(row)):
                continue
            total += sigma_p_l(F, v, p, l, p, row, budget=budget).value
    return Fraction(p**L.m, p**F.n * (p - 1) ** L.m) * total


def local_factor_identities(
    F: FormSystem,
    v,
    p: int,
    D: int,
    W: int,
    t: Sequence[int],
    s: Sequence[int],
    b: Sequence[int],
    level: int = 2,
    budget: Optional[int] = None,
) -> Tuple[Optional[bool], Optional[bool], Optional[bool]]:
    """Local-factor identities at truncation level l.

    (p, DW) = 1: sigma(DW, t) == sigma(1, 0)
    p | D:       sigma(DW, t) == sigma(p, t) == sigma(p, s)
    p | W:       sigma(DW, t) == sigma(p, t) == sigma(p, b)
    Entries whose case does not apply are None.
    """
    require_prime(p)
    for name, X in (("D", D), ("W", W)):
        if not factorize(X).squarefree:
            raise ValidationError(f"{name} must be squarefree")
    if math.gcd(D, W) != 1:
        raise ValidationError("D and W must be coprime")
    if any((ti - si) % D for ti, si in zip(t, s)):
        raise ValidationError("t is not congruent to s mod D")
    if any((ti - bi) % W for ti, bi in zip(t, b)):
        raise ValidationError("t is not congruent to b mod W")
    sig = lambda mod, res: sigma_p_l(F, v, p, level, mod, res, budget=budget).value
    base = sig(D * W, t)
    first = second = third = None
    if math.gcd(p, D * W) == 1:
        first = base == sig(1, None)
    if D % p == 0:
        second = base == sig(p, t) == sig(p, s)
    if W % p == 0:
        third = base == sig(p, t) == sig(p, b)
    return first, second, third


def level_for(p: int, cap: int = 4096, minimum: int = 2) -> int:
    """Largest l >= minimum with p^l <= cap (at least minimum)."""
    l = minimum
    while p ** (l + 1) <= cap:
        l += 1
    return l


def local_product(
    F: FormSystem,
    v,
    primes: Sequence[int],
    D: int = 1,
    s: Optional[Sequence[int]] = None,
    cap: int = 4096,
    budget: Optional[int] = None,
) -> Tuple[float, List[LocalDensity]]:
    """prod over the given primes of sigma_p^{l_p}(D, s, v), l_p from level_for."""
    out = []
    prod = Fraction(1)
    for p in primes:
        d = sigma_p_l(F, v, p, level_for(p, cap), D, s, budget=budget)
        out.append(d)
        prod *= d.value
    return float(prod), out
