"""Exhaustive counting of solutions of F(x) = v in the box {1..N}^n.

All routines enumerate a Cartesian product of per-coordinate value lists in
int64 chunks. Work splits statically on the first coordinate, so counts are
exact integers regardless of the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .arith import coprime_to_W, is_prime, is_rough
from .errors import StructureError, ValidationError, check_budget
from .forms import FormSystem, LinearFamily, as_target
from .grid import map_partitions, product_grid, product_size
from .sieve import SievePlan, WeightFunction, lambda_R


@dataclass(frozen=True)
class BoxSpec:
    """The cube {1..N}^n."""

    N: int
    n: int

    def __post_init__(self):
        if self.N < 1 or self.n < 1:
            raise ValidationError("box needs N >= 1 and n >= 1")


@dataclass(frozen=True)
class CongruenceRestriction:
    """x = s (mod D) coordinatewise."""

    D: int = 1
    s: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.D < 1:
            raise ValidationError("modulus D must be >= 1")
        object.__setattr__(self, "s", tuple(int(a) for a in self.s))

    def residues(self, n: int) -> Tuple[int, ...]:
        if not self.s:
            return (0,) * n
        if len(self.s) != n:
            raise ValidationError(f"residue vector has length {len(self.s)}, need {n}")
        return tuple(a % self.D for a in self.s)


@dataclass
class ScanStats:
    """Side-channel counters surfaced in reports."""

    steps: int = 0
    zero_linear_excluded: int = 0
    negative_linear_values: int = 0
    warnings: List[str] = field(default_factory=list)


def _value_lists(F: FormSystem, box: BoxSpec, c: Optional[CongruenceRestriction]) -> List[range]:
    if box.n != F.n:
        raise ValidationError(f"box dimension {box.n} != n = {F.n}")
    c = c or CongruenceRestriction()
    res = c.residues(F.n)
    out = []
    for r in res:
        first = r if r >= 1 else r + c.D
        out.append(range(first, box.N + 1, c.D))
    return out


def _solutions_piece(F: FormSystem, target: Tuple[int, ...], lists) -> np.ndarray:
    tgt = np.asarray(target, dtype=np.int64)
    found = []
    for X in product_grid(lists):
        vals = F.evaluate_many(X)
        hit = (vals == tgt).all(axis=1)
        if hit.any():
            found.append(X[hit])
    if not found:
        return np.zeros((0, F.n), dtype=np.int64)
    return np.concatenate(found)


def enumerate_solutions(
    F: FormSystem,
    v,
    box: BoxSpec,
    c: Optional[CongruenceRestriction] = None,
    budget: Optional[int] = None,
    workers: int = 1,
) -> np.ndarray:
    """All x in the box with x = s (mod D) and F(x) = v, lexicographic order."""
    target = as_target(v, F)
    lists = _value_lists(F, box, c)
    check_budget("enumerate box", product_size(lists), budget)
    parts = map_partitions(partial(_solutions_piece, F, target), lists, workers)
    return np.concatenate(parts) if parts else np.zeros((0, F.n), dtype=np.int64)


def _count_piece(F: FormSystem, target: Tuple[int, ...], lists) -> int:
    tgt = np.asarray(target, dtype=np.int64)
    total = 0
    for X in product_grid(lists):
        total += int((F.evaluate_many(X) == tgt).all(axis=1).sum())
    return total


def count_congruent_solutions(
    F: FormSystem,
    v,
    box: BoxSpec,
    c: Optional[CongruenceRestriction] = None,
    budget: Optional[int] = None,
    workers: int = 1,
) -> int:
    """|{x in {1..N}^n : x = s (mod D), F(x) = v}| by full enumeration."""
    target = as_target(v, F)
    lists = _value_lists(F, box, c)
    check_budget("count_congruent_solutions", product_size(lists), budget)
    return sum(map_partitions(partial(_count_piece, F, target), lists, workers))


# ---------------------------
# Last-variable accelerator
# ---------------------------

def _last_variable_coeffs(F: FormSystem) -> List[int]:
    """c_i with F_i = G_i(x_1..x_{n-1}) + c_i x_n^2, or StructureError."""
    if F.k != 2:
        raise StructureError("last-variable path needs quadratic forms")
    last = F.n - 1
    coeffs = []
    for form in F.forms:
        c = 0
        for coef, e in form:
            if e[last] == 2:
                c = coef
            elif e[last]:
                raise StructureError("x_n appears in a cross term")
        coeffs.append(c)
    if not any(coeffs):
        raise StructureError("x_n does not occur")
    return coeffs


def _isqrt_exact(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(root, ok) with root^2 == t where ok; t may be negative."""
    tt = np.where(t >= 0, t, 0)
    root = np.floor(np.sqrt(tt.astype(float))).astype(np.int64)
    for _ in range(2):
        root = np.where(root * root > tt, root - 1, root)
        root = np.where((root + 1) * (root + 1) <= tt, root + 1, root)
    return root, (t >= 0) & (root * root == t)


def _last_var_piece(F: FormSystem, target, coeffs, last_values, D, s_last, lists) -> int:
    n = F.n
    tgt = np.asarray(target, dtype=np.int64)
    i0 = next(i for i, c in enumerate(coeffs) if c)
    c0 = coeffs[i0]
    lo, hi = last_values
    total = 0
    for Xp in product_grid(lists):
        X = np.zeros((len(Xp), n), dtype=np.int64)
        X[:, :-1] = Xp
        G = F.evaluate_many(X)
        num = tgt[i0] - G[:, i0]
        div = num % c0 == 0
        t = np.where(div, num // c0, -1)
        root, ok = _isqrt_exact(t)
        ok &= div & (root >= lo) & (root <= hi) & ((root - s_last) % D == 0)
        if not ok.any():
            continue
        X = X[ok]
        X[:, -1] = root[ok]
        total += int((F.evaluate_many(X) == tgt).all(axis=1).sum())
    return total


def last_variable_accelerated_count(
    F: FormSystem,
    v,
    box: BoxSpec,
    c: Optional[CongruenceRestriction] = None,
    budget: Optional[int] = None,
    workers: int = 1,
) -> int:
    """Same value as count_congruent_solutions, solving x_n from a c·x_n^2 term.

    Raises StructureError unless every F_i contains x_n only through c_i x_n^2.
    """
    coeffs = _last_variable_coeffs(F)
    target = as_target(v, F)
    lists = _value_lists(F, box, c)
    check_budget("last_variable_accelerated_count", product_size(lists[:-1]), budget)
    c = c or CongruenceRestriction()
    s_last = c.residues(F.n)[-1]
    piece = partial(_last_var_piece, F, target, coeffs, (1, box.N), c.D, s_last)
    if F.n == 1:
        return piece([])
    return sum(map_partitions(piece, lists[:-1], workers))


def fast_count(F: FormSystem, v, box: BoxSpec, c=None, budget=None, workers: int = 1) -> int:
    """Accelerated count when the structure allows, else full enumeration."""
    try:
        return last_variable_accelerated_count(F, v, box, c, budget, workers)
    except StructureError:
        return count_congruent_solutions(F, v, box, c, budget, workers)


# ---------------------------
# Almost-prime and sieve-weighted sums
# ---------------------------

def _linear_values(L: LinearFamily, sols: np.ndarray, stats: Optional[ScanStats]) -> Tuple[np.ndarray, np.ndarray]:
    """|l_i(x)| per solution and a mask of solutions with no zero value."""
    vals = L.values_many(sols) if len(sols) else np.zeros((0, L.m), dtype=np.int64)
    keep = (vals != 0).all(axis=1)
    if stats is not None:
        stats.zero_linear_excluded += int((~keep).sum())
        stats.negative_linear_values += int((vals < 0).any(axis=1).sum())
        if (~keep).any():
            stats.warnings.append(f"{int((~keep).sum())} solution(s) with some l_i(x) = 0 excluded")
        if (vals < 0).any():
            stats.warnings.append("negative l_i(x) values evaluated through |l_i(x)|")
    return np.abs(vals), keep


def count_almost_prime_solutions(
    F: FormSystem,
    L: LinearFamily,
    v,
    box: BoxSpec,
    eps: float,
    budget: Optional[int] = None,
    workers: int = 1,
    stats: Optional[ScanStats] = None,
) -> int:
    """Solutions with every |l_i(x)| free of prime factors below N^eps."""
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    if L.n != F.n:
        raise ValidationError("linear family and form system disagree on n")
    sols = enumerate_solutions(F, v, box, None, budget, workers)
    vals, keep = _linear_values(L, sols, stats)
    bound = box.N**eps
    count = 0
    for row, ok in zip(vals.tolist(), keep.tolist()):
        if ok and all(is_rough(a, bound) for a in row):
            count += 1
    return count


def sieve_weighted_sum(
    F: FormSystem,
    L: LinearFamily,
    v,
    box: BoxSpec,
    plan: SievePlan,
    b: Optional[Sequence[int]] = None,
    q: Optional[int] = None,
    weight=None,
    budget: Optional[int] = None,
    workers: int = 1,
    stats: Optional[ScanStats] = None,
) -> float:
    """sum of Lambda_R(l_1(x)...l_m(x))^2 over solutions in the box.

    With b: only x = b (mod W), and (L(b), W) must be 1. Without b: all x with
    (L(x), W) = 1, which is the sum of the b-restricted sums over admissible b.
    With q: only x with q | l_1(x)...l_m(x). ``weight`` replaces Lambda_R^2.
    """
    W = plan.W
    if L.n != F.n:
        raise ValidationError("linear family and form system disagree on n")
    if q is not None and (not is_prime(q) or q <= plan.omega):
        raise ValidationError("q must be a prime > omega")
    if b is not None:
        b = [int(a) for a in b]
        if len(b) != F.n:
            raise ValidationError("b has the wrong length")
        if not coprime_to_W(L.values(b), W):
            raise ValidationError("b is not admissible: (L(b), W) != 1")
        c = CongruenceRestriction(W, tuple(b))
    else:
        c = None
    sols = enumerate_solutions(F, v, box, c, budget, workers)
    vals, keep = _linear_values(L, sols, stats)
    if weight is None:
        f = plan.f
        weight = lambda M: lambda_R(M, f, plan.R) ** 2
    terms = []
    for row, ok in zip(vals.tolist(), keep.tolist()):
        if not ok:
            continue
        if W > 1 and not coprime_to_W(row, W):
            continue
        M = math.prod(row)
        if q is not None and M % q:
            continue
        terms.append(float(weight(M)))
    return math.fsum(terms)


def admissible_residues(L: LinearFamily, W: int) -> List[Tuple[int, ...]]:
    """All b in Z_W^n with (L(b), W) = 1."""
    out = []
    for X in product_grid([range(W)] * L.n):
        vals = L.values_many(X)
        ok = (np.gcd(vals, W) == 1).all(axis=1)
        out.extend(tuple(row) for row in X[ok].tolist())
    return out
