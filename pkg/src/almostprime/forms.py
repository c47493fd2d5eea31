"""Integral form systems F = (F_1..F_r), linear families L, and their algebra.

Forms are entered as sparse monomial lists ``[(coeff, (e_1..e_n)), ...]`` and
converted to symmetric coefficient tensors a^i with k!·a^i integral, which is
what the multilinear differencing forms need.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, permutations, product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arith import require_prime
from .errors import ValidationError, check_budget
from .grid import residue_grid

Monomial = Tuple[int, Tuple[int, ...]]

_INT64_SAFE = 2**62


# ---------------------------
# Small exact linear algebra
# ---------------------------

def rank_mod_p(rows: Sequence[Sequence[int]], p: int) -> int:
    m = [[x % p for x in row] for row in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][c], -1, p)
        m[rank] = [(x * inv) % p for x in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][c]:
                f = m[i][c]
                m[i] = [(a - f * b) % p for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank


def rank_rational(rows: Sequence[Sequence]) -> int:
    m = [[Fraction(x) for x in row] for row in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for i in range(rank + 1, len(m)):
            if m[i][c] != 0:
                f = m[i][c] / m[rank][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[rank])]
        rank += 1
    return rank


# ---------------------------
# Form systems
# ---------------------------

def _poly_eval_int(monos: Sequence[Monomial], x: Sequence[int]) -> int:
    total = 0
    for c, e in monos:
        t = c
        for xi, ei in zip(x, e):
            if ei:
                t *= xi**ei
        total += t
    return total


def _derivative(monos: Sequence[Monomial], j: int) -> Tuple[Monomial, ...]:
    out = []
    for c, e in monos:
        if e[j]:
            e2 = list(e)
            e2[j] -= 1
            out.append((c * e[j], tuple(e2)))
    return tuple(out)


def _normalize(monos) -> Tuple[Monomial, ...]:
    acc: Dict[Tuple[int, ...], int] = {}
    for c, e in monos:
        e = tuple(int(v) for v in e)
        acc[e] = acc.get(e, 0) + int(c)
    return tuple(sorted((c, e) for e, c in acc.items() if c != 0))


@dataclass(frozen=True)
class FormSystem:
    """r integral forms of common degree k in n variables."""

    n: int
    forms: Tuple[Tuple[Monomial, ...], ...]
    declared_rank: Optional[int] = None
    k: int = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("need n >= 1")
        forms = tuple(_normalize(f) for f in self.forms)
        if not forms:
            raise ValidationError("need at least one form")
        degrees = set()
        for f in forms:
            for c, e in f:
                if len(e) != self.n:
                    raise ValidationError(f"exponent vector {e} has length != n={self.n}")
                if any(v < 0 for v in e):
                    raise ValidationError("negative exponent")
                degrees.add(sum(e))
        if len(degrees) != 1:
            raise ValidationError(f"forms must be homogeneous of one degree, got degrees {sorted(degrees)}")
        k = degrees.pop()
        if k < 2:
            raise ValidationError("degree must be >= 2")
        if self.declared_rank is not None and not 0 <= self.declared_rank <= self.n:
            raise ValidationError("declared_rank must lie in [0, n]")
        object.__setattr__(self, "forms", forms)
        object.__setattr__(self, "k", k)

    # --- constructors
    @classmethod
    def from_monomials(cls, n: int, forms, declared_rank: Optional[int] = None) -> "FormSystem":
        return cls(n, tuple(tuple((c, tuple(e)) for c, e in f) for f in forms), declared_rank)

    @classmethod
    def diagonal(cls, coeffs: Sequence[int], k: int = 2, declared_rank: Optional[int] = None) -> "FormSystem":
        n = len(coeffs)
        mono = []
        for j, c in enumerate(coeffs):
            e = [0] * n
            e[j] = k
            mono.append((c, tuple(e)))
        return cls(n, (tuple(mono),), declared_rank)

    @classmethod
    def quadratic(cls, A: Sequence[Sequence[int]], declared_rank: Optional[int] = None) -> "FormSystem":
        """Form x·Ax for an integer symmetric matrix A."""
        n = len(A)
        mono = []
        for i in range(n):
            for j in range(n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                mono.append((int(A[i][j]), tuple(e)))
        return cls(n, (tuple(mono),), declared_rank)

    @property
    def r(self) -> int:
        return len(self.forms)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "forms": [[[c, list(e)] for c, e in f] for f in self.forms],
            "declared_rank": self.declared_rank,
        }

    @classmethod
    def from_json(cls, d: dict) -> "FormSystem":
        return cls.from_monomials(d["n"], d["forms"], d.get("declared_rank"))

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # --- coefficient tensors
    @cached_property
    def tensors(self) -> Tuple[np.ndarray, ...]:
        """Symmetric Fraction tensors a^i with F_i(x) = sum a^i_{j1..jk} x_j1..x_jk."""
        out = []
        kf = math.factorial(self.k)
        for f in self.forms:
            T = np.empty((self.n,) * self.k, dtype=object)
            T.fill(Fraction(0))
            for c, e in f:
                idx = [j for j, ej in enumerate(e) for _ in range(ej)]
                mult = kf // math.prod(math.factorial(v) for v in e)
                val = Fraction(c, mult)
                for perm in set(permutations(idx)):
                    T[perm] = val
            out.append(T)
        return tuple(out)

    @cached_property
    def gradient(self) -> Tuple[Tuple[Tuple[Monomial, ...], ...], ...]:
        return tuple(tuple(_derivative(f, j) for j in range(self.n)) for f in self.forms)

    # --- evaluation
    def _check_len(self, x) -> None:
        if len(x) != self.n:
            raise ValidationError(f"point has length {len(x)}, system has n={self.n}")

    def max_coeff_mass(self) -> int:
        return max(sum(abs(c) for c, _ in f) for f in self.forms)

    def evaluate_many(self, X: np.ndarray, modulus: Optional[int] = None) -> np.ndarray:
        """Values F_i at each row of X, shape (len(X), r).

        With a modulus the result is reduced into [0, modulus); the modulus
        must satisfy modulus^2 < 2^62 so products stay in int64.
        """
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValidationError(f"expected array of shape (*, {self.n})")
        out_dtype = np.int64
        if modulus is not None:
            if modulus < 1 or modulus * modulus >= _INT64_SAFE:
                raise ValidationError("modulus out of vectorised range")
            X = X % modulus
        else:
            bound = int(np.abs(X).max(initial=0)) if X.size else 0
            if bound**self.k * self.max_coeff_mass() >= _INT64_SAFE:
                out_dtype = object
                X = X.astype(object)
        res = np.zeros((X.shape[0], self.r), dtype=out_dtype)
        for i, f in enumerate(self.forms):
            acc = np.zeros(X.shape[0], dtype=out_dtype)
            for c, e in f:
                if modulus is not None:
                    t = np.full(X.shape[0], c % modulus, dtype=np.int64)
                    for j, ej in enumerate(e):
                        for _ in range(ej):
                            t = (t * X[:, j]) % modulus
                    acc = (acc + t) % modulus
                else:
                    t = np.full(X.shape[0], c, dtype=out_dtype)
                    for j, ej in enumerate(e):
                        if ej:
                            t = t * X[:, j] ** ej
                    acc = acc + t
            res[:, i] = acc
        return res

    def evaluate_real(self, Y: np.ndarray) -> np.ndarray:
        """Float values at real points, shape (len(Y), r)."""
        Y = np.asarray(Y, dtype=float)
        res = np.zeros((Y.shape[0], self.r))
        for i, f in enumerate(self.forms):
            for c, e in f:
                t = np.full(Y.shape[0], float(c))
                for j, ej in enumerate(e):
                    if ej:
                        t *= Y[:, j] ** ej
                res[:, i] += t
        return res

    def jacobian_many(self, X: np.ndarray, p: int) -> np.ndarray:
        """Partial derivatives mod p at each row, shape (len(X), r, n)."""
        X = np.asarray(X) % p
        out = np.zeros((X.shape[0], self.r, self.n), dtype=np.int64)
        for i in range(self.r):
            for j in range(self.n):
                acc = np.zeros(X.shape[0], dtype=np.int64)
                for c, e in self.gradient[i][j]:
                    t = np.full(X.shape[0], c % p, dtype=np.int64)
                    for jj, ej in enumerate(e):
                        for _ in range(ej):
                            t = (t * X[:, jj]) % p
                    acc = (acc + t) % p
                out[:, i, j] = acc
        return out

    def singular_mask(self, X: np.ndarray, p: int) -> np.ndarray:
        """True where the Jacobian mod p has rank < r."""
        J = self.jacobian_many(X, p)
        if self.r == 1:
            return ~J[:, 0, :].any(axis=1)
        mask = np.zeros(len(J), dtype=bool)
        for idx in range(len(J)):
            mask[idx] = rank_mod_p(J[idx].tolist(), p) < self.r
        return mask


def evaluate(F: FormSystem, x: Sequence[int], modulus: Optional[int] = None) -> List[int]:
    F._check_len(x)
    vals = [_poly_eval_int(f, [int(v) for v in x]) for f in F.forms]
    if modulus is not None:
        if modulus < 1:
            raise ValidationError("modulus must be positive")
        vals = [v % modulus for v in vals]
    return vals


def jacobian_mod_p(F: FormSystem, s: Sequence[int], p: int) -> Tuple[List[List[int]], int]:
    require_prime(p)
    F._check_len(s)
    s = [int(v) for v in s]
    M = [[_poly_eval_int(F.gradient[i][j], s) % p for j in range(F.n)] for i in range(F.r)]
    return M, rank_mod_p(M, p)


def multilinear_phi(F: FormSystem, *hs: Sequence[int]) -> List[List[int]]:
    """Matrix Phi[i][j] = k! sum a^i_{j1..j_{k-1}, j} h^1_{j1} ... h^{k-1}_{j_{k-1}}."""
    if len(hs) != F.k - 1:
        raise ValidationError(f"need k-1 = {F.k - 1} difference vectors, got {len(hs)}")
    for h in hs:
        F._check_len(h)
    kf = math.factorial(F.k)
    out = []
    for T in F.tensors:
        row = []
        for j in range(F.n):
            acc = Fraction(0)
            sub = T[..., j]
            for idx in product(range(F.n), repeat=F.k - 1):
                a = sub[idx]
                if a:
                    term = a
                    for h, t in zip(hs, idx):
                        term *= h[t]
                    acc += term
            val = acc * kf
            if val.denominator != 1:
                raise ValidationError("non-integral multilinear form; coefficients are not integral")
            row.append(int(val))
        out.append(row)
    return out


def iterated_difference(F: FormSystem, hs: Sequence[Sequence[int]], x: Sequence[int]) -> List[int]:
    """D_{h_t} ... D_{h_1} F(x) by inclusion-exclusion over subsets of the shifts."""
    t = len(hs)
    total = [0] * F.r
    for size in range(t + 1):
        sign = -1 if (t - size) % 2 else 1
        for S in combinations(range(t), size):
            y = list(x)
            for i in S:
                y = [a + b for a, b in zip(y, hs[i])]
            for i, v in enumerate(evaluate(F, y)):
                total[i] += sign * v
    return total


def difference_identity_check(F: FormSystem, hs: Sequence[Sequence[int]], x: Sequence[int]) -> bool:
    """The (k-1)-fold difference is affine in x with linear part x·Phi(h)."""
    g_x = iterated_difference(F, hs, x)
    g_0 = iterated_difference(F, hs, [0] * F.n)
    phi = multilinear_phi(F, *hs)
    lin = [sum(xj * pij for xj, pij in zip(x, row)) for row in phi]
    return all(a - b == c for a, b, c in zip(g_x, g_0, lin))


def quadratic_matrix(F: FormSystem) -> List[List[Fraction]]:
    if F.r != 1 or F.k != 2:
        raise ValidationError("quadratic matrix needs r = 1, k = 2")
    T = F.tensors[0]
    return [[T[i, j] for j in range(F.n)] for i in range(F.n)]


def rank_quadratic(F: FormSystem) -> int:
    if F.r != 1 or F.k != 2:
        raise ValidationError(
            "rank_quadratic only handles one quadratic form; declare the rank for general systems"
        )
    return rank_rational(quadratic_matrix(F))


def birch_rank(F: FormSystem) -> Optional[int]:
    """Computed rank where we can (single quadratic), else the declared value."""
    if F.r == 1 and F.k == 2:
        return rank_quadratic(F)
    return F.declared_rank


def birch_condition(F: FormSystem) -> Optional[bool]:
    """Rank(F) > r(r+1)(k-1)2^(k-1), or None when the rank is unknown."""
    rank = birch_rank(F)
    if rank is None:
        return None
    return rank > F.r * (F.r + 1) * (F.k - 1) * 2 ** (F.k - 1)


def count_singular_points_mod_p(F: FormSystem, v: Sequence[int], p: int, budget: Optional[int] = None) -> int:
    """|{s in Z_p^n : F(s) = v mod p, rank Jac(s) < r}|."""
    require_prime(p)
    check_budget("count_singular_points_mod_p", p**F.n, budget)
    target = np.asarray([int(t) % p for t in v], dtype=np.int64)
    total = 0
    for X in residue_grid(p, F.n):
        on = (F.evaluate_many(X, p) == target).all(axis=1)
        if on.any():
            total += int(F.singular_mask(X[on], p).sum())
    return total


# ---------------------------
# Linear families and targets
# ---------------------------

@dataclass(frozen=True)
class LinearFamily:
    """m integral linear forms in n variables, rows of an m x n matrix."""

    matrix: Tuple[Tuple[int, ...], ...]
    n: int

    def __post_init__(self):
        rows = tuple(tuple(int(a) for a in row) for row in self.matrix)
        for row in rows:
            if len(row) != self.n:
                raise ValidationError("linear form has wrong length")
            if not any(row):
                raise ValidationError("zero linear form")
        object.__setattr__(self, "matrix", rows)

    @classmethod
    def from_rows(cls, rows, n: Optional[int] = None) -> "LinearFamily":
        rows = [list(r) for r in rows]
        if n is None:
            if not rows:
                raise ValidationError("n required for an empty family")
            n = len(rows[0])
        return cls(tuple(tuple(r) for r in rows), n)

    @classmethod
    def coordinates(cls, n: int, which: Sequence[int]) -> "LinearFamily":
        rows = []
        for j in which:
            e = [0] * n
            e[j] = 1
            rows.append(e)
        return cls.from_rows(rows, n)

    @property
    def m(self) -> int:
        return len(self.matrix)

    def values(self, x: Sequence[int]) -> List[int]:
        return [sum(a * b for a, b in zip(row, x)) for row in self.matrix]

    def values_many(self, X: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.zeros((len(X), 0), dtype=np.int64)
        return np.asarray(X, dtype=np.int64) @ np.asarray(self.matrix, dtype=np.int64).T

    def to_json(self) -> dict:
        return {"n": self.n, "rows": [list(r) for r in self.matrix]}


def pairwise_independent(L: LinearFamily) -> bool:
    for a, b in combinations(L.matrix, 2):
        if not any(a[i] * b[j] - a[j] * b[i] for i in range(L.n) for j in range(i + 1, L.n)):
            return False
    return True


@dataclass(frozen=True)
class TargetVector:
    v: Tuple[int, ...]

    @classmethod
    def of(cls, v, F: Optional[FormSystem] = None) -> "TargetVector":
        if isinstance(v, int):
            v = (v,)
        t = cls(tuple(int(a) for a in v))
        if F is not None and len(t.v) != F.r:
            raise ValidationError(f"target has length {len(t.v)}, system has r={F.r}")
        return t


def as_target(v, F: FormSystem) -> Tuple[int, ...]:
    if isinstance(v, TargetVector):
        v = v.v
    return TargetVector.of(v, F).v
