"""Circle-method numerics: exponential and Gauss sums, Weyl differencing bound,
major arcs, truncated singular series, singular integral, Birch main term.

Phases for rational frequencies are reduced exactly in integer arithmetic:
a sum over x of e(a·F(x)/q) is a histogram of a·F(x) mod q paired with the
q-th roots of unity, so the only rounding is in the final weighted sum.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .arith import factorize, primes_upto
from .errors import ValidationError, check_budget
from .forms import FormSystem, as_target, multilinear_phi
from .grid import product_grid, product_size, residue_grid
from . import padic
from .padic import _cyclic_convolve, _diagonal_coeffs


def _fsum_complex(values) -> complex:
    values = np.asarray(values, dtype=complex)
    return complex(math.fsum(values.real), math.fsum(values.imag))


def _roots(q: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(q) / q)


def _is_rational(a) -> bool:
    return isinstance(a, (int, Fraction, np.integer))


# ---------------------------
# Exponential and Gauss sums
# ---------------------------

def _shifted_lists(N: int, n: int, d: int, s: Sequence[int]) -> List[range]:
    """x with 1 <= d x + s_j <= N, per coordinate."""
    out = []
    for sj in s:
        lo = -((sj - 1) // d)  # ceil((1 - s)/d)
        hi = (N - sj) // d
        out.append(range(lo, hi + 1))
    return out


def exp_sum(
    F: FormSystem,
    d: int,
    s: Sequence[int],
    alpha: Sequence,
    N: int,
    budget: Optional[int] = None,
) -> complex:
    """S_N(d, s, alpha) = sum over x with dx+s in [1,N]^n of e(alpha·F(dx+s)).

    Rational entries of alpha (int/Fraction) get exact argument reduction.
    """
    if len(alpha) != F.r:
        raise ValidationError("alpha must have length r")
    s = [0] * F.n if s is None else [int(a) for a in s]
    lists = _shifted_lists(N, F.n, d, s)
    check_budget("exp_sum", product_size(lists), budget)
    sv = np.asarray(s, dtype=np.int64)
    if all(_is_rational(a) for a in alpha):
        fr = [Fraction(a) for a in alpha]
        q = math.lcm(*[f.denominator for f in fr])
        nums = [f.numerator * (q // f.denominator) for f in fr]
        hist = np.zeros(q, dtype=np.int64)
        for X in product_grid(lists):
            vals = F.evaluate_many(d * X + sv, q)
            ph = (vals @ np.asarray(nums, dtype=np.int64)) % q
            hist += np.bincount(ph, minlength=q)
        return _fsum_complex(hist * _roots(q))
    al = np.asarray([float(a) for a in alpha])
    parts = []
    for X in product_grid(lists):
        vals = F.evaluate_many(d * X + sv).astype(float)
        frac = np.mod(vals * al, 1.0).sum(axis=1) % 1.0
        parts.append(_fsum_complex(np.exp(2j * np.pi * frac)))
    return _fsum_complex(parts) if parts else 0j


def value_histogram(F: FormSystem, q: int, d: int = 1, s: Optional[Sequence[int]] = None, budget: Optional[int] = None) -> np.ndarray:
    """Counts c[w] = #{x in Z_q^n : F(dx+s) = w mod q}, array of shape (q,)*r."""
    s = np.zeros(F.n, dtype=np.int64) if s is None else np.asarray(s, dtype=np.int64)
    diag = _diagonal_coeffs(F)
    if diag is not None:
        # one form, no cross terms: convolve per-coordinate value counts
        xs = np.arange(q, dtype=np.int64)
        dist = np.zeros(q, dtype=np.int64)
        dist[0] = 1
        for j, a in enumerate(diag):
            y = (d * xs + s[j]) % q
            vals = np.full(q, a % q, dtype=np.int64)
            for _ in range(F.k):
                vals = (vals * y) % q
            dist = _cyclic_convolve(dist, np.bincount(vals, minlength=q), q)
        return dist
    check_budget("Z_q^n enumeration", q**F.n, budget)
    hist = np.zeros(q**F.r, dtype=np.int64)
    weights = q ** np.arange(F.r - 1, -1, -1, dtype=np.int64)
    for X in residue_grid(q, F.n):
        vals = F.evaluate_many((d * X + s) % q, q)
        hist += np.bincount(vals @ weights, minlength=q**F.r)
    return hist.reshape((q,) * F.r)


def gauss_sum(F: FormSystem, a: Sequence[int], q: int, d: int = 1, s: Optional[Sequence[int]] = None, budget: Optional[int] = None) -> complex:
    """S_{a,q}(d, s) = sum_{x in Z_q^n} e(a·F(dx+s)/q)."""
    if isinstance(a, (int, np.integer)):
        a = [int(a)]
    if len(a) != F.r:
        raise ValidationError("a must have length r")
    if q < 1:
        raise ValidationError("q must be >= 1")
    hist = value_histogram(F, q, d, s, budget).ravel()
    idx = np.indices((q,) * F.r).reshape(F.r, -1).T
    ph = (idx @ np.asarray(a, dtype=np.int64)) % q
    return _fsum_complex(hist * _roots(q)[ph])


def _primitive_frequency_sum(hist: np.ndarray, q: int, v: Sequence[int]) -> complex:
    """sum over a in Z_q^r with gcd(a, q) = 1 of e(-a·v/q) sum_w c[w] e(a·w/q)."""
    r = hist.ndim
    # S[a] = sum_w c[w] e(a·w/q)
    S = np.fft.ifftn(hist.astype(complex)) * q**r
    idx = np.indices((q,) * r).reshape(r, -1).T
    g = np.gcd.reduce(np.concatenate([idx, np.full((len(idx), 1), q)], axis=1), axis=1)
    prim = g == 1
    ph = (idx @ np.asarray(v, dtype=np.int64)) % q
    terms = S.ravel()[prim] * _roots(q)[(-ph[prim]) % q]
    return _fsum_complex(terms)


def local_factor_via_gauss(
    F: FormSystem,
    v,
    p: int,
    l: int,
    d: int = 1,
    s: Optional[Sequence[int]] = None,
    budget: Optional[int] = None,
) -> float:
    """sum_{t=0}^{l} p^{-tn} sum_{(a,p^t)=1} e(-a·v/p^t) S_{a,p^t}(d, s).

    Real up to rounding; equals the counting density sigma_p^l(d, s, v).
    """
    v = as_target(v, F)
    if l < 0:
        raise ValidationError("level must be >= 0")
    total = [1.0 + 0j]
    for t in range(1, l + 1):
        q = p**t
        hist = value_histogram(F, q, d, s, budget)
        total.append(_primitive_frequency_sum(hist, q, v) / float(q) ** F.n)
    z = _fsum_complex(total)
    return z.real


@dataclass
class SingularSeriesTruncation:
    value: complex
    Q_max: int
    partials: List[Tuple[int, complex]] = field(default_factory=list)

    @property
    def tail_proxy(self) -> float:
        """|sum of the terms for the last ten moduli| (a size proxy, not a bound)."""
        last = [t for q, t in self.partials if q > self.Q_max - 10]
        return abs(_fsum_complex(last)) if last else 0.0

    def to_json(self) -> dict:
        return {
            "value": self.value.real,
            "imag": self.value.imag,
            "Q_max": self.Q_max,
            "tail_proxy": self.tail_proxy,
            "terms": [[q, t.real, t.imag] for q, t in self.partials],
        }


def singular_series(
    F: FormSystem,
    v,
    d: int = 1,
    s: Optional[Sequence[int]] = None,
    Q_max: int = 20,
    budget: Optional[int] = None,
) -> SingularSeriesTruncation:
    """sum_{q <= Q_max} sum_{(a,q)=1} q^{-n} e(-a·v/q) S_{a,q}(d, s)."""
    v = as_target(v, F)
    if Q_max < 1:
        raise ValidationError("Q_max must be >= 1")
    check_budget("singular_series", sum(q**F.n for q in range(1, Q_max + 1)), budget)
    partials = []
    for q in range(1, Q_max + 1):
        hist = value_histogram(F, q, d, s)
        partials.append((q, _primitive_frequency_sum(hist, q, v) / float(q) ** F.n))
    return SingularSeriesTruncation(_fsum_complex([t for _, t in partials]), Q_max, partials)


# ---------------------------
# Weyl differencing and major arcs
# ---------------------------

def _dist_to_int(x: float) -> float:
    return abs(x - round(x))


def weyl_rhs(F: FormSystem, d: int, alpha: Sequence[float], N1: float, budget: Optional[int] = None) -> float:
    """N1^{-kn} sum_{h^1..h^{k-1} in [-N1,N1]^n} prod_j min(N1, ||d^k alpha·Phi_j(h)||^{-1})."""
    if len(alpha) != F.r:
        raise ValidationError("alpha must have length r")
    H = int(math.floor(N1))
    side = range(-H, H + 1)
    count = (2 * H + 1) ** (F.n * (F.k - 1))
    check_budget("weyl_rhs", count, budget)
    dk = d**F.k
    al = [float(a) for a in alpha]
    terms = []
    for flat in product_grid([side] * (F.n * (F.k - 1))):
        for row in flat.tolist():
            hs = [row[i * F.n : (i + 1) * F.n] for i in range(F.k - 1)]
            phi = multilinear_phi(F, *hs)
            prod = 1.0
            for j in range(F.n):
                beta = dk * sum(al[i] * phi[i][j] for i in range(F.r))
                dist = _dist_to_int(beta)
                prod *= N1 if dist == 0 else min(N1, 1.0 / dist)
            terms.append(prod)
    return math.fsum(terms) * N1 ** (-F.k * F.n)


@dataclass(frozen=True)
class MajorArcParams:
    theta: float
    N1: float
    r: int
    k: int

    @property
    def kappa(self) -> float:
        return self.r * (self.k - 1) * self.theta

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValidationError("theta must lie in (0, 1)")
        if self.N1 <= 1:
            raise ValidationError("N1 must exceed 1")


def major_arc_membership(alpha: Sequence[float], params: MajorArcParams, widened: bool = False) -> Optional[Tuple[Tuple[int, ...], int]]:
    """(a, q) with q <= N1^kappa, gcd(a, q) = 1 and |alpha_i - a_i/q| within the arc width.

    Width is q^{-1} N1^{-k+kappa}; ``widened`` drops the q^{-1} (the M' arcs).
    Smallest q wins.
    """
    if len(alpha) != params.r:
        raise ValidationError("alpha must have length r")
    Qmax = int(math.floor(params.N1**params.kappa + 1e-12))
    base = params.N1 ** (-params.k + params.kappa)
    for q in range(1, Qmax + 1):
        width = base if widened else base / q
        a = tuple(int(round(float(x) * q)) for x in alpha)
        if math.gcd(*a, q) != 1:
            continue
        if all(abs(float(x) - ai / q) <= width for x, ai in zip(alpha, a)):
            return a, q
    return None


# ---------------------------
# Singular integral
# ---------------------------

@dataclass
class SingularIntegralEstimate:
    value: float
    method: str
    stderr: float = 0.0
    samples: int = 0
    seed: Optional[int] = None
    delta: Optional[float] = None
    halved_value: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "delta": self.delta,
            "halved_value": self.halved_value,
            **self.extra,
        }


MC_CHUNK = 1 << 16


def _mc_chunk(F: FormSystem, u: np.ndarray, delta: float, seed: int, index: int, size: int) -> Tuple[int, int]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))
    Y = rng.random((size, F.n))
    dev = np.abs(F.evaluate_real(Y) - u).max(axis=1)
    return int((dev <= delta).sum()), int((dev <= delta / 2).sum())


def singular_integral_J(
    F: FormSystem,
    u,
    method: str = "montecarlo",
    samples: int = 10**6,
    delta: Optional[float] = None,
    seed: int = 0,
    Phi: float = 10.0,
    nodes: int = 200,
) -> SingularIntegralEstimate:
    """Density of real solutions of F(y) = u on [0,1]^n.

    montecarlo: slab volume {|F_i(y) - u_i| <= delta} / (2 delta)^r with the
    delta/2 slab from the same samples as a halving check. Sample chunks draw
    from Philox streams keyed by (seed, chunk index).
    oscillatory: J(u; Phi) = int_{|g|<=Phi} I(g) e(-g u) dg, r = 1 only.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if len(u) != F.r:
        raise ValidationError("u must have length r")
    if method == "oscillatory":
        return _J_oscillatory(F, float(u[0]), Phi, nodes)
    if method != "montecarlo":
        raise ValidationError("method must be 'montecarlo' or 'oscillatory'")
    if delta is None:
        delta = 0.02 * max(1.0, float(np.abs(u).max()))
    hits = hits_half = 0
    for index, start in enumerate(range(0, samples, MC_CHUNK)):
        h, hh = _mc_chunk(F, u, delta, seed, index, min(MC_CHUNK, samples - start))
        hits += h
        hits_half += hh
    vol = (2 * delta) ** F.r
    phat = hits / samples
    return SingularIntegralEstimate(
        value=phat / vol,
        method="montecarlo",
        stderr=math.sqrt(phat * (1 - phat) / samples) / vol,
        samples=samples,
        seed=seed,
        delta=delta,
        halved_value=hits_half / samples / (delta**F.r),
    )


def _gl_nodes(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return (x + 1) / 2, w / 2


def oscillatory_integral_I(F: FormSystem, gamma: Sequence[float], nodes: int = 200) -> complex:
    """I(gamma) = int_{[0,1]^n} e(gamma·F(y)) dy by Gauss-Legendre.

    Factorises for a single diagonal form; otherwise a tensor grid (small n).
    """
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    x, w = _gl_nodes(nodes)
    diag = padic._diagonal_coeffs(F)
    if diag is not None:
        out = 1.0 + 0j
        for a in diag:
            out *= complex(np.sum(w * np.exp(2j * np.pi * g[0] * a * x**F.k)))
        return out
    check_budget("oscillatory tensor grid", nodes**F.n, 10**7)
    pts = np.stack(np.meshgrid(*([x] * F.n), indexing="ij"), -1).reshape(-1, F.n)
    wts = np.prod(np.stack(np.meshgrid(*([w] * F.n), indexing="ij"), -1).reshape(-1, F.n), axis=1)
    vals = F.evaluate_real(pts) @ g
    return complex(np.sum(wts * np.exp(2j * np.pi * vals)))


def _J_oscillatory(F: FormSystem, u: float, Phi: float, nodes: int) -> SingularIntegralEstimate:
    if F.r != 1:
        raise ValidationError("oscillatory J is implemented for r = 1")
    gx, gw = np.polynomial.legendre.leggauss(max(64, int(8 * Phi)))
    gam = gx * Phi
    vals = np.array([oscillatory_integral_I(F, [t], nodes) * np.exp(-2j * np.pi * t * u) for t in gam])
    J = complex(np.sum(gw * Phi * vals))
    return SingularIntegralEstimate(J.real, "oscillatory", extra={"Phi": Phi, "imag": J.imag})


# ---------------------------
# Birch main term
# ---------------------------

@dataclass
class BirchPrediction:
    value: float
    N: int
    D: int
    J: SingularIntegralEstimate
    local_product: float
    local_factors: List[dict]
    P_max: int
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "N": self.N,
            "D": self.D,
            "J": self.J.to_json(),
            "local_product": self.local_product,
            "local_factors": self.local_factors,
            "P_max": self.P_max,
        }


def birch_prediction(
    F: FormSystem,
    v,
    N: int,
    D: int = 1,
    s: Optional[Sequence[int]] = None,
    P_max: int = 50,
    level_cap: int = 4096,
    J: Optional[SingularIntegralEstimate] = None,
    samples: int = 10**6,
    seed: int = 0,
    delta: Optional[float] = None,
) -> BirchPrediction:
    """N^{n-rk} D^{-n} J(N^{-k} v) prod_{p <= P_max} sigma_p^{l_p}(D, s, v)."""
    t0 = time.perf_counter()
    v = as_target(v, F)
    if J is None:
        u = [a / N**F.k for a in v]
        J = singular_integral_J(F, u, samples=samples, seed=seed, delta=delta)
    if J.value == 0:
        prod, facs = 0.0, []
    else:
        prod, dens = padic.local_product(F, v, primes_upto(P_max), D, s, cap=level_cap)
        facs = [d.to_json() for d in dens]
    value = float(N) ** (F.n - F.r * F.k) * float(D) ** (-F.n) * J.value * prod
    return BirchPrediction(value, N, D, J, prod, facs, P_max, time.perf_counter() - t0)
