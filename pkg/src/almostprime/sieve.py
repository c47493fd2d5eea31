"""Sieve layer: weight f, Lambda_R, h_D, truncated Euler sums, constants.

Combinatorial structure (divisors, Moebius signs, lcm pairs) is exact; the
values f(log d / log R) are double precision because log d / log R is
irrational in general.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .arith import factorize, is_prime, mobius, mobius_table, primes_upto, primorial, squarefree_divisors
from .errors import ValidationError

Number = Union[int, float, Fraction]


# ---------------------------
# Weight function f(x) = (1-x)_+^{8m}
# ---------------------------

@dataclass(frozen=True)
class WeightFunction:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("m must be >= 1")

    @property
    def degree(self) -> int:
        return 8 * self.m

    def derivative_scale(self, j: int) -> int:
        """f^{(j)}(x) = (-1)^j * scale * (1-x)^{8m-j} on [0,1)."""
        if j > self.degree:
            return 0
        return math.factorial(self.degree) // math.factorial(self.degree - j)

    def coefficients(self, j: int = 0) -> List[int]:
        """Exact integer coefficients of f^{(j)} in powers of x (lowest first)."""
        a = self.degree - j
        if a < 0:
            return [0]
        sign = -1 if j % 2 else 1
        scale = sign * self.derivative_scale(j)
        return [scale * math.comb(a, i) * (-1) ** i for i in range(a + 1)]

    def __call__(self, x: float) -> float:
        if x >= 1.0:
            return 0.0
        return (1.0 - x) ** self.degree

    def derivative(self, x: float, j: int) -> float:
        if x >= 1.0 or j > self.degree:
            return 0.0
        sign = -1.0 if j % 2 else 1.0
        return sign * self.derivative_scale(j) * (1.0 - x) ** (self.degree - j)

    def values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x < 1.0, np.clip(1.0 - x, 0.0, None) ** self.degree, 0.0)


def _tlog(d: int, R: float) -> float:
    return math.log(d) / math.log(R) if d > 1 else 0.0


# ---------------------------
# Lambda_R and h_D
# ---------------------------

def lambda_R(M: int, f: WeightFunction, R: float) -> float:
    """sum_{d | M} mu(d) f(log d / log R)."""
    if M < 1:
        raise ValidationError("Lambda_R needs M >= 1")
    if R < 2:
        raise ValidationError("R must be >= 2")
    return math.fsum(mu * f(_tlog(d, R)) for d, mu in squarefree_divisors(M) if d < R)


def lcm_pair_sum(D: int, weight: Callable[[int], float]) -> float:
    """sum over ordered (d1, d2) with lcm(d1, d2) = D of mu(d1) mu(d2) w(d1) w(d2).

    D must be squarefree. Each prime of D goes to d1 only, d2 only, or both.
    """
    if not factorize(D).squarefree:
        raise ValidationError(f"{D} is not squarefree")
    w = {d: weight(d) for d, _ in squarefree_divisors(D)}
    terms = []
    for d1, mu1 in squarefree_divisors(D):
        rest = D // d1
        # d2 = rest * (any divisor of d1)
        for e, mu_e in squarefree_divisors(d1):
            d2 = rest * e
            mu2 = mobius(rest) * mu_e
            terms.append(mu1 * mu2 * w[d1] * w[d2])
    return math.fsum(terms)


def h_D(D: int, f: WeightFunction, R: float) -> float:
    """sum_{[d1,d2] = D} mu(d1) mu(d2) f(log d1/log R) f(log d2/log R)."""
    if R < 2:
        raise ValidationError("R must be >= 2")
    return lcm_pair_sum(D, lambda d: f(_tlog(d, R)))


def h_local_factor(p: int, f: WeightFunction, R: float) -> float:
    """h_p = f(t)^2 - 2 f(t), t = log p / log R. Equals h_D only for D = p."""
    t = f(_tlog(p, R))
    return t * t - 2.0 * t


# ---------------------------
# Euler factor sources
# ---------------------------

class SyntheticGamma:
    """gamma_p = m / p exactly (the asymptotic profile of the true factors)."""

    def __init__(self, m: int):
        self.m = m

    def __call__(self, p: int) -> Fraction:
        return Fraction(self.m, p)

    def describe(self) -> dict:
        return {"model": "m/p", "m": self.m}


class TableGamma:
    """gamma_p from an explicit table; missing primes are an error."""

    def __init__(self, table: Dict[int, Number], default: Optional[Callable[[int], Number]] = None):
        self.table = {int(p): v for p, v in table.items()}
        self.default = default

    def __call__(self, p: int):
        if p in self.table:
            return self.table[p]
        if self.default is not None:
            return self.default(p)
        raise ValidationError(f"no gamma_p available for p = {p}")

    def describe(self) -> dict:
        return {"model": "table", "primes": sorted(self.table)}


GammaSource = Callable[[int], Number]


def _admissible_d(R: float, W: int) -> np.ndarray:
    """Squarefree d < R with gcd(d, W) = 1, ascending."""
    top = max(1, math.ceil(R) - 1)
    mu = mobius_table(top)
    d = np.nonzero(mu)[0]
    d = d[d < R]
    if W > 1:
        d = d[np.gcd(d, W) == 1]
    return d.astype(np.int64)


def _gamma_table(limit: int, primes: Sequence[int], gamma: GammaSource) -> np.ndarray:
    """gamma_d for squarefree d <= limit built multiplicatively (0 where unused)."""
    tab = np.zeros(limit + 1, dtype=float)
    tab[1] = 1.0
    # multiplicative sieve over squarefree numbers coprime to excluded primes
    ok = np.zeros(limit + 1, dtype=bool)
    ok[1] = True
    for p in primes:
        if p > limit:
            break
        g = float(gamma(p))
        idx = np.nonzero(ok[: limit // p + 1])[0]
        idx = idx[idx % p != 0]
        tab[idx * p] = tab[idx] * g
        ok[idx * p] = True
    return tab


def euler_sieve_sum(
    gamma: GammaSource,
    f: WeightFunction,
    R: float,
    W: int = 1,
    q: Optional[int] = None,
    D_max: Optional[float] = None,
) -> float:
    """Truncated sum over squarefree D, (D, W) = 1, of gamma_{D or [D,q]} h_D(R).

    Evaluated as the equivalent double sum over (d1, d2) with d_i < R, which
    covers every D with h_D != 0; gamma_{[d1,d2]} = gamma_{d1} gamma_{d2/(d1,d2)}.
    """
    if R < 2:
        raise ValidationError("R must be >= 2")
    if q is not None:
        if not is_prime(q):
            raise ValidationError("q must be prime")
        if math.gcd(q, W) != 1:
            raise ValidationError("q must exceed omega (be coprime to W)")
    ds = _admissible_d(R, W)
    if len(ds) == 0:
        return 0.0
    top = int(ds.max())
    adm_primes = [p for p in primes_upto(top) if W % p]
    gtab = _gamma_table(top, adm_primes, gamma)
    mu = mobius_table(top)[ds].astype(float)
    fv = f.values(np.log(ds) / math.log(R))
    a = mu * fv
    gamma_q = float(gamma(q)) if q is not None else 1.0
    partials = []
    for i, d1 in enumerate(ds.tolist()):
        if a[i] == 0.0:
            continue
        g = np.gcd(d1, ds)
        lcm_factor = gtab[ds // g] * gtab[d1]
        if q is not None:
            hit = (d1 % q == 0) | (ds % q == 0)
            lcm_factor = np.where(hit, lcm_factor, lcm_factor * gamma_q)
        t = a[i] * a * lcm_factor
        if D_max is not None:
            t = np.where(d1 * (ds // g) <= D_max, t, 0.0)
        partials.append(math.fsum(t))
    return math.fsum(partials)


def squarefree_D_upto(limit: float, W: int, prime_cap: float) -> List[int]:
    """Squarefree D <= limit coprime to W with all prime factors < prime_cap (DFS)."""
    ps = [p for p in primes_upto(min(limit, prime_cap)) if W % p and p < prime_cap]
    out = [1]

    def dfs(start: int, cur: int):
        for i in range(start, len(ps)):
            nxt = cur * ps[i]
            if nxt > limit:
                break
            out.append(nxt)
            dfs(i + 1, nxt)

    dfs(0, 1)
    return sorted(out)


def euler_sieve_sum_by_D(
    gamma: GammaSource,
    f: WeightFunction,
    R: float,
    W: int = 1,
    q: Optional[int] = None,
    D_max: Optional[float] = None,
) -> float:
    """Same sum, enumerating D directly with h_D by pair expansion. Slow; a cross-check."""
    limit = R * R if D_max is None else min(D_max, R * R)
    total = []
    for D in squarefree_D_upto(limit, W, R):
        hd = h_D(D, f, R)
        if hd == 0.0:
            continue
        Dg = D if q is None or D % q == 0 else D * q
        g = 1.0
        for p in factorize(Dg).primes:
            g *= float(gamma(p))
        total.append(g * hd)
    return math.fsum(total)


# ---------------------------
# Constants c_m(f), c'_{m+1}(f)
# ---------------------------

def beta_integral(a: int, b: int) -> Fraction:
    """int_0^1 (1-x)^a x^b dx = a! b! / (a+b+1)!."""
    return Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + 1))


def _derivative_square_moment(f: WeightFunction, j: int, m: int) -> Fraction:
    """int_0^inf f^{(j)}(x)^2 x^{m-1}/(m-1)! dx, exactly."""
    a = f.degree - j
    if a < 0:
        return Fraction(0)
    scale = f.derivative_scale(j)
    return Fraction(scale * scale) * beta_integral(2 * a, m - 1) / math.factorial(m - 1)


class SieveConstants(NamedTuple):
    c_m: Fraction
    c_prime: Fraction

    @property
    def ratio(self) -> float:
        return float(self.c_prime / self.c_m)


def sieve_constants(m: int, f: Optional[WeightFunction] = None) -> SieveConstants:
    f = f or WeightFunction(m)
    c = _derivative_square_moment(f, m, m)
    cp = 2 * m * _derivative_square_moment(f, m + 1, m)
    return SieveConstants(c, cp)


def sieve_constants_quadrature(m: int) -> Tuple[float, float]:
    """Independent check of sieve_constants by adaptive quadrature."""
    from scipy.integrate import quad

    f = WeightFunction(m)
    w = lambda x: x ** (m - 1) / math.factorial(m - 1)
    c, _ = quad(lambda x: f.derivative(x, m) ** 2 * w(x), 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    cp, _ = quad(lambda x: f.derivative(x, m + 1) ** 2 * w(x), 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    return c, 2 * m * cp


def shifted_derivative_integral(m: int, tau: float) -> float:
    """int_0^inf (f^{(m)}(x) - f^{(m)}(x+tau))^2 x^{m-1}/(m-1)! dx by quadrature."""
    from scipy.integrate import quad

    f = WeightFunction(m)
    g = lambda x: (f.derivative(x, m) - f.derivative(x + tau, m)) ** 2 * x ** (m - 1) / math.factorial(m - 1)
    pts = [max(0.0, 1.0 - tau)] if 0.0 < tau < 1.0 else None
    val, _ = quad(g, 0.0, 1.0, points=pts, epsabs=0, epsrel=1e-12, limit=200)
    return val


# ---------------------------
# Main terms and parameters
# ---------------------------

def phi_ratio(W: int) -> float:
    """phi(W)/W for squarefree W."""
    out = Fraction(1)
    for p in factorize(W).primes:
        out *= Fraction(p - 1, p)
    return float(out)


def sieve_sum_main_term(m: int, R: float, W: int = 1, q: Optional[int] = None) -> float:
    """(phi(W)/W log R)^{-m} times c_m(f), or the q-restricted variant."""
    base = (phi_ratio(W) * math.log(R)) ** (-m)
    if q is None:
        return base * float(sieve_constants(m).c_m)
    return m / q * base * shifted_derivative_integral(m, math.log(q) / math.log(R))


def weighted_count_main_term(m: int, N: float, n: int, r: int, k: int, R: float, sigma_star: float) -> float:
    """c_m(f) N^{n-rk} (log R)^{-m} Sigma*(N, v)."""
    return float(sieve_constants(m).c_m) * N ** (n - r * k) * math.log(R) ** (-m) * sigma_star


def refined_count_main_term(
    m: int, N: float, n: int, r: int, k: int, R: float, sigma_star: float, eps: float, eta: float
) -> float:
    """c'_{m+1}(f) (eps/eta)^2 N^{n-rk} (log R)^{-m} Sigma*(N, v)."""
    cp = float(sieve_constants(m).c_prime)
    return cp * (eps / eta) ** 2 * N ** (n - r * k) * math.log(R) ** (-m) * sigma_star


def predicted_main_term(kind: str, **inputs) -> float:
    kinds = {"sieve_sum": sieve_sum_main_term, "weighted_count": weighted_count_main_term, "refined_count": refined_count_main_term}
    if kind not in kinds:
        raise ValidationError(f"unknown main-term kind {kind!r}; choose from {sorted(kinds)}")
    try:
        return kinds[kind](**inputs)
    except TypeError as exc:
        raise ValidationError(f"{kind}: {exc}") from exc


class SieveExponents(NamedTuple):
    eta: Fraction
    eta_prime: Fraction
    epsilon: Union[Fraction, float]


def sieve_exponents(m: int, r: int, k: int, variant: str = "headline") -> SieveExponents:
    """Admissible sieve exponents.

    variant="headline": eps = (2^8 m^{3/2} r^2 (r+1)(r+2) k (k+1))^{-1}
    variant="working":   eps = (16 m)^{-3/2} eta
    """
    if m < 1 or r < 1 or k < 2:
        raise ValidationError("need m, r >= 1 and k >= 2")
    eta = Fraction(1, 8 * r * r * (r + 1) * (r + 2) * k * (k + 1))
    eta_p = Fraction(1, 4 * r * r * (r + 1) * (r + 2) * k * k)
    base = m if variant == "headline" else 16 * m
    root = math.isqrt(base)
    if root * root == base:
        m32: Union[Fraction, float] = Fraction(base * root)
    else:
        m32 = base**1.5
    if variant == "headline":
        eps = 1 / (256 * m32 * r * r * (r + 1) * (r + 2) * k * (k + 1))
    elif variant == "working":
        eps = eta / m32
    else:
        raise ValidationError("variant must be 'headline' or 'working'")
    return SieveExponents(eta, eta_p, eps)


def max_eps_over_eta(m: int) -> float:
    """Largest eps/eta with (c'_{m+1}/c_m)(eps/eta)^2 <= 1/2."""
    return math.sqrt(0.5 / sieve_constants(m).ratio)


# ---------------------------
# Sieve plan
# ---------------------------

@dataclass(frozen=True)
class SievePlan:
    """Binds m, N, R, eps, omega and W = primorial(omega)."""

    m: int
    N: int
    R: float
    omega: int = 1
    eps: Optional[float] = None

    def __post_init__(self):
        if self.m < 1 or self.N < 1:
            raise ValidationError("m and N must be positive")
        if self.R < 2:
            raise ValidationError("R must be >= 2")
        if self.omega < 1:
            raise ValidationError("omega must be >= 1")

    @classmethod
    def from_exponents(cls, m: int, N: int, eta: float, eps: float, omega: int = 1) -> "SievePlan":
        if not 0 < eps < eta < 1:
            raise ValidationError("need 0 < eps < eta < 1")
        return cls(m, N, float(N) ** eta, omega, eps)

    @property
    def W(self) -> int:
        return primorial(self.omega)

    @property
    def eta(self) -> float:
        return math.log(self.R) / math.log(self.N) if self.N > 1 else math.inf

    @property
    def f(self) -> WeightFunction:
        return WeightFunction(self.m)

    def to_json(self) -> dict:
        return {"m": self.m, "N": self.N, "R": self.R, "omega": self.omega, "W": self.W, "eps": self.eps, "eta": self.eta}
