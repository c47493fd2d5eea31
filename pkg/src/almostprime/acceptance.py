"""Built-in verification suite.

Each check returns a CheckResult; ``run_all`` runs them in order. Tolerances
are fixed here and echoed in the result details.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional

from . import circle, padic, sieve
from .arith import crt_pair, divisors, mobius, primorial, rad, squarefree_divisors
from .counter import BoxSpec, last_variable_accelerated_count, sieve_weighted_sum
from .errors import ValidationError
from .fixtures import (
    indefinite_quinary,
    product_form,
    single_square,
    split_quaternary,
    sum_of_squares,
)
from .forms import FormSystem, LinearFamily, evaluate, jacobian_mod_p
from .grid import residue_grid


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: Dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_short(v)}" for k, v in self.detail.items() if k != "rows")
        return f"[{status}] {self.name} ({self.seconds:.2f}s) {brief}"

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "seconds": self.seconds}


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def _nonsingular_point(F: FormSystem, p: int) -> Optional[List[int]]:
    for X in residue_grid(p, F.n):
        for row in X.tolist():
            if any(row) and jacobian_mod_p(F, row, p)[1] == F.r:
                return row
    return None


def check_gauss_local_identity() -> CheckResult:
    """Local density from Gauss sums equals the counting density."""
    worst = 0.0
    cases = 0
    no_ns = []
    for name, F in (("x1x2", product_form()), ("three_squares", sum_of_squares(3)), ("x1x2+x3x4", split_quaternary())):
        for p in (2, 3, 5):
            ns = _nonsingular_point(F, p)
            if ns is None:
                no_ns.append(f"{name}@{p}")
                ns = [1] + [0] * (F.n - 1)
            for l in (1, 2):
                for d in (1, p):
                    for s in ([0] * F.n, ns):
                        for v in (0, 1):
                            a = circle.local_factor_via_gauss(F, [v], p, l, d, s)
                            b = padic.sigma_p_l(F, [v], p, l, d, s).value
                            worst = max(worst, abs(a - float(b)))
                            cases += 1
    detail = {"cases": cases, "max_abs_diff": worst, "tol": 1e-9}
    if no_ns:
        detail["no_nonsingular_point"] = no_ns
    return CheckResult("gauss-sum local density identity", worst <= 1e-9, detail)


def check_nonsingular_lemma() -> CheckResult:
    """sigma_p^l(p, s, v) = p^r at every nonsingular s on the fiber."""
    bad = []
    cases = 0
    for F in (product_form(), sum_of_squares(3)):
        for p in (3, 5, 7):
            levels = (1, 2, 3) if p <= 5 else (1, 2)
            for X in residue_grid(p, F.n):
                for s in X.tolist():
                    if jacobian_mod_p(F, s, p)[1] < F.r:
                        continue
                    v = evaluate(F, s, p)
                    for l in levels:
                        got = padic.sigma_p_l(F, v, p, l, p, s).value
                        cases += 1
                        if got != p**F.r:
                            bad.append((F.digest(), p, l, s, str(got)))
    return CheckResult("nonsingular lemma", not bad and cases > 0, {"cases": cases, "failures": bad[:5]})


def check_gamma_decay() -> CheckResult:
    F = sum_of_squares(5)
    L = LinearFamily.coordinates(5, [0, 1])
    rows = []
    worst = 0.0
    for p in (3, 5, 7, 11, 13):
        g = padic.gamma_p(F, L, [1], p, 2).value
        dev = p * p * abs(float(g) - 2 / p)
        worst = max(worst, dev)
        rows.append({"p": p, "gamma_p": f"{g.numerator}/{g.denominator}", "p2_dev": dev})
    brute = padic.gamma_p_brute(F, L, [1], 3, 2)
    hybrid3 = padic.gamma_p(F, L, [1], 3, 2).value
    ok = worst <= 10 and brute == hybrid3
    return CheckResult(
        "Euler factor decay gamma_p ~ 2/p",
        ok,
        {"max_p2_dev": worst, "bound": 10, "brute_p3": str(brute), "hybrid_p3": str(hybrid3), "rows": rows},
    )


def check_divisor_identity(samples: int = 1000, seed: int = 1) -> CheckResult:
    rng = random.Random(seed)
    f = sieve.WeightFunction(1)
    worst = 0.0
    for R in (10, 100):
        for _ in range(samples):
            M = rng.randint(1, 10**6)
            lhs = sieve.lambda_R(M, f, R) ** 2
            rhs = math.fsum(sieve.h_D(D, f, R) for D, _ in squarefree_divisors(rad(M)))
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1.0))
    # multiplicativity of the lcm-pair sum for a completely multiplicative weight
    mult = 0.0
    w = lambda d: d**-0.5
    for D1, D2 in ((2, 3), (6, 35), (10, 21), (30, 77), (7, 11 * 13 * 17)):
        a = sieve.lcm_pair_sum(D1 * D2, w)
        b = sieve.lcm_pair_sum(D1, w) * sieve.lcm_pair_sum(D2, w)
        mult = max(mult, abs(a - b) / max(abs(a), 1.0))
    local = max(abs(sieve.h_D(p, f, R) - sieve.h_local_factor(p, f, R)) for p in (2, 3, 5, 7, 11, 97) for R in (10, 100))
    ok = worst <= 1e-12 and mult <= 1e-12 and local <= 1e-15
    return CheckResult(
        "squared weight divisor identity",
        ok,
        {"max_rel_err": worst, "multiplicativity_err": mult, "local_factor_err": local, "tol": 1e-12},
    )


def check_sieve_constants() -> CheckResult:
    c = sieve.sieve_constants(1)
    qc, qcp = sieve.sieve_constants_quadrature(1)
    exact = c.c_m == Fraction(64, 15) and c.c_prime == Fraction(6272, 13)
    rel = max(abs(qc - float(c.c_m)) / float(c.c_m), abs(qcp - float(c.c_prime)) / float(c.c_prime))
    return CheckResult(
        "sieve constants m=1",
        exact and rel <= 1e-9,
        {
            "c_1": str(c.c_m),
            "c_prime_2": str(c.c_prime),
            "quadrature_rel_err": rel,
            "ratio": c.ratio,
            "ratio_exceeds_32": c.ratio > 32,
        },
    )


def check_sieve_main_term() -> CheckResult:
    f = sieve.WeightFunction(1)
    W = primorial(7)
    rows = {}
    for R in (10**3, 10**4):
        S = sieve.euler_sieve_sum(sieve.SyntheticGamma(1), f, R, W=W)
        P = sieve.sieve_sum_main_term(1, R, W=W)
        rows[R] = (S, P, S / P)
    r3, r4 = rows[1000][2], rows[10**4][2]
    in_band = 0.6 <= r3 <= 1.4
    trend = abs(r4 - 1) <= abs(r3 - 1) + 0.05
    return CheckResult(
        "sieve sum vs main term (omega=7)",
        in_band and trend,
        {
            "S_R1e3": rows[1000][0],
            "main_R1e3": rows[1000][1],
            "ratio_R1e3": r3,
            "ratio_R1e4": r4,
            "band": [0.6, 1.4],
            "band_ok": in_band,
            "trend_ok": trend,
        },
    )


def check_birch_count(samples: int = 10**6, seed: int = 0) -> CheckResult:
    F = indefinite_quinary()
    rows = {}
    for N in (20, 40):
        cnt = last_variable_accelerated_count(F, [0], BoxSpec(N, 5))
        pred = circle.birch_prediction(F, [0], N, samples=samples, seed=seed)
        rows[N] = (cnt, pred.value, abs(cnt / pred.value - 1))
    ok = rows[40][2] <= 0.30 and rows[40][2] <= rows[20][2] + 0.05
    return CheckResult(
        "count vs circle-method main term",
        ok,
        {
            "count_N20": rows[20][0],
            "pred_N20": rows[20][1],
            "dev_N20": rows[20][2],
            "count_N40": rows[40][0],
            "pred_N40": rows[40][1],
            "dev_N40": rows[40][2],
        },
    )


def check_gauss_magnitude() -> CheckResult:
    from .arith import primes_upto

    F = single_square()
    worst = 0.0
    for p in primes_upto(50):
        if p == 2:
            continue
        for a in range(1, p):
            worst = max(worst, abs(abs(circle.gauss_sum(F, [a], p)) - math.sqrt(p)))
    return CheckResult("quadratic Gauss sum magnitude", worst <= 1e-9, {"max_abs_err": worst, "tol": 1e-9})


def _points(q: int, n: int) -> List[List[int]]:
    return [row for X in residue_grid(q, n) for row in X.tolist()]


def check_local_factor_lemma() -> CheckResult:
    F = product_form()
    bad = []
    cases = 0
    for D, W in ((3, 2), (5, 6)):
        for p in (2, 3, 5, 7):
            for l in (1, 2):
                for s in _points(D, 2):
                    for b in _points(W, 2):
                        t = [crt_pair(si, D, bi, W) for si, bi in zip(s, b)]
                        res = padic.local_factor_identities(F, [1], p, D, W, t, s, b, l)
                        cases += 1
                        if any(x is False for x in res):
                            bad.append((D, W, p, l, s, b, res))
    return CheckResult("local factor congruence identities", not bad, {"cases": cases, "failures": bad[:5]})


def check_singular_integral(samples: int = 10**6) -> CheckResult:
    F = sum_of_squares(2)
    a = circle.singular_integral_J(F, [0.5], samples=samples, seed=0)
    b = circle.singular_integral_J(F, [0.5], samples=samples, seed=1)
    target = math.pi / 4
    rel = abs(a.value - target) / target
    se = math.hypot(a.stderr, b.stderr)
    seed_ok = abs(a.value - b.value) <= 3 * se
    I0 = circle.oscillatory_integral_I(F, [0.0])
    i_ok = abs(I0 - 1) <= 1e-12
    return CheckResult(
        "Monte Carlo singular integral",
        rel <= 0.02 and seed_ok and i_ok,
        {"J_seed0": a.value, "J_seed1": b.value, "stderr": a.stderr, "rel_err": rel, "I0": abs(I0)},
    )


def _lambda_by_definition(M: int, f, R: float) -> float:
    return math.fsum(mobius(d) * f(math.log(d) / math.log(R)) for d in divisors(M))


def check_q_restricted_weights() -> CheckResult:
    F = sum_of_squares(2)
    L = LinearFamily.coordinates(2, [0, 1])
    plan = sieve.SievePlan(m=2, N=13, R=13.0, omega=1)
    got = sieve_weighted_sum(F, L, [13], BoxSpec(13, 2), plan, q=3)
    f = plan.f
    terms = []
    for x1 in range(1, 14):
        for x2 in range(1, 14):
            if x1 * x1 + x2 * x2 != 13:
                continue
            M = x1 * x2
            if M % 3:
                continue
            terms.append(_lambda_by_definition(M, f, plan.R) ** 2)
    want = math.fsum(terms)
    err = abs(got - want) / max(abs(want), 1.0)
    return CheckResult(
        "q-restricted weighted sum",
        err <= 1e-12 and len(terms) > 0,
        {"sum": got, "direct": want, "terms": len(terms), "rel_err": err},
    )


CHECKS: List[Callable[[], CheckResult]] = [
    check_gauss_local_identity,
    check_nonsingular_lemma,
    check_gamma_decay,
    check_divisor_identity,
    check_sieve_constants,
    check_sieve_main_term,
    check_birch_count,
    check_gauss_magnitude,
    check_local_factor_lemma,
    check_singular_integral,
    check_q_restricted_weights,
]


def timed(check: Callable[[], CheckResult]) -> CheckResult:
    t0 = time.perf_counter()
    res = check()
    res.seconds = time.perf_counter() - t0
    return res


def run_all(only: Optional[List[int]] = None) -> List[CheckResult]:
    bad = [i for i in only or () if not 1 <= i <= len(CHECKS)]
    if bad:
        raise ValidationError(f"check numbers must be in 1..{len(CHECKS)}, got {bad}")
    picked = CHECKS if not only else [CHECKS[i - 1] for i in only]
    return [timed(c) for c in picked]
