import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostprime.arith import primorial
from almostprime.counter import (
    BoxSpec,
    CongruenceRestriction,
    ScanStats,
    admissible_residues,
    count_almost_prime_solutions,
    count_congruent_solutions,
    enumerate_solutions,
    fast_count,
    last_variable_accelerated_count,
    sieve_weighted_sum,
)
from almostprime.errors import BudgetExceeded, StructureError, ValidationError
from almostprime.fixtures import indefinite_quinary, product_form, sum_of_squares
from almostprime.forms import FormSystem, LinearFamily
from almostprime.sieve import SievePlan, WeightFunction, lambda_R

TWO_SQ = sum_of_squares(2)
L2 = LinearFamily.coordinates(2, [0, 1])


@pytest.mark.parametrize(
    "v, N, D, s, expected",
    [(25, 25, 1, (), 2), (3, 10, 1, (), 0), (8, 10, 2, (0, 0), 1)],
)
def test_count_examples(v, N, D, s, expected):
    c = CongruenceRestriction(D, s)
    assert count_congruent_solutions(TWO_SQ, [v], BoxSpec(N, 2), c) == expected
    assert last_variable_accelerated_count(TWO_SQ, [v], BoxSpec(N, 2), c) == expected


def test_enumerated_solutions():
    sols = enumerate_solutions(TWO_SQ, [25], BoxSpec(25, 2))
    assert sols.tolist() == [[3, 4], [4, 3]]


def test_quinary_accelerator_matches_enumeration():
    F = indefinite_quinary()
    assert last_variable_accelerated_count(F, [0], BoxSpec(12, 5)) == count_congruent_solutions(F, [0], BoxSpec(12, 5))


def test_accelerator_refuses_cross_terms():
    with pytest.raises(StructureError):
        last_variable_accelerated_count(product_form(), [1], BoxSpec(5, 2))
    assert fast_count(product_form(), [6], BoxSpec(6, 2)) == 4


def test_accelerator_random_instances():
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(2, 4)
        monos = []
        for i in range(n - 1):
            for j in range(i, n - 1):
                c = rng.randint(-2, 2)
                if c:
                    e = [0] * n
                    e[i] += 1
                    e[j] += 1
                    monos.append((c, tuple(e)))
        last = [0] * n
        last[-1] = 2
        monos.append((rng.choice([-3, -1, 1, 2]), tuple(last)))
        F = FormSystem.from_monomials(n, [monos])
        N = rng.randint(3, 9 if n < 4 else 6)
        v = rng.randint(-20, 40)
        D = rng.choice([1, 1, 2, 3])
        s = tuple(rng.randrange(D) for _ in range(n))
        c = CongruenceRestriction(D, s)
        assert last_variable_accelerated_count(F, [v], BoxSpec(N, n), c) == count_congruent_solutions(F, [v], BoxSpec(N, n), c)


def test_partition_invariance():
    F = indefinite_quinary()
    whole = count_congruent_solutions(F, [3], BoxSpec(8, 5))
    assert count_congruent_solutions(F, [3], BoxSpec(8, 5), workers=3) == whole
    assert last_variable_accelerated_count(F, [3], BoxSpec(8, 5), workers=2) == whole


def test_budget_refusal_names_cost():
    with pytest.raises(BudgetExceeded) as info:
        count_congruent_solutions(indefinite_quinary(), [0], BoxSpec(100, 5), budget=10**6)
    assert info.value.required == 100**5


def test_almost_prime_examples():
    assert count_almost_prime_solutions(TWO_SQ, L2, [25], BoxSpec(25, 2), 0.2) == 2
    assert count_almost_prime_solutions(TWO_SQ, L2, [25], BoxSpec(25, 2), 0.3) == 0
    assert count_almost_prime_solutions(TWO_SQ, L2, [3], BoxSpec(10, 2), 0.3) == 0


def test_almost_prime_excludes_zero_linear_values():
    L = LinearFamily.from_rows([[1, -1]])
    stats = ScanStats()
    # x1 = x2 solutions of x1^2 + x2^2 = 50: (5,5) has l(x) = 0; (1,7), (7,1) have |l| = 6
    got = count_almost_prime_solutions(TWO_SQ, L, [50], BoxSpec(10, 2), 0.1, stats=stats)
    assert got == 2
    assert stats.zero_linear_excluded == 1
    assert stats.negative_linear_values == 1
    assert stats.warnings


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0.05, 0.45))
def test_almost_prime_monotone_in_eps(a, b):
    lo, hi = sorted((a, b))
    box = BoxSpec(40, 2)
    assert count_almost_prime_solutions(TWO_SQ, L2, [1105], box, hi) <= count_almost_prime_solutions(TWO_SQ, L2, [1105], box, lo)


def test_sieve_sum_examples():
    plan_w2 = SievePlan(m=2, N=25, R=30.0, omega=2)
    assert sieve_weighted_sum(TWO_SQ, L2, [25], BoxSpec(25, 2), plan_w2) == 0.0
    assert sieve_weighted_sum(TWO_SQ, L2, [3], BoxSpec(10, 2), SievePlan(2, 10, 10.0)) == 0.0
    plan = SievePlan(m=2, N=13, R=169.0)
    f = WeightFunction(2)
    want = math.fsum([lambda_R(6, f, 169.0) ** 2, lambda_R(6, f, 169.0) ** 2])
    assert sieve_weighted_sum(TWO_SQ, L2, [13], BoxSpec(13, 2), plan) == pytest.approx(want, rel=1e-14)


def test_constant_weight_gives_plain_count():
    F = sum_of_squares(3)
    L = LinearFamily.coordinates(3, [0, 1, 2])
    box = BoxSpec(15, 3)
    plan = SievePlan(3, 15, 2.0)
    total = sieve_weighted_sum(F, L, [129], box, plan, weight=lambda M: 1)
    assert total == count_congruent_solutions(F, [129], box)


def test_sum_over_admissible_residues_matches_aggregate():
    F = sum_of_squares(3)
    L = LinearFamily.coordinates(3, [0, 1])
    box = BoxSpec(30, 3)
    plan = SievePlan(2, 30, 20.0, omega=3)
    W = plan.W
    assert W == primorial(3)
    whole = sieve_weighted_sum(F, L, [419], box, plan)
    parts = [sieve_weighted_sum(F, L, [419], box, plan, b=b) for b in admissible_residues(L, W)]
    assert math.fsum(parts) == pytest.approx(whole, rel=1e-12, abs=1e-15)
    assert whole > 0


def test_sieve_sum_validates_inputs():
    plan = SievePlan(2, 25, 30.0, omega=2)
    with pytest.raises(ValidationError):
        sieve_weighted_sum(TWO_SQ, L2, [25], BoxSpec(25, 2), plan, b=[0, 1])
    with pytest.raises(ValidationError):
        sieve_weighted_sum(TWO_SQ, L2, [25], BoxSpec(25, 2), plan, q=2)
    with pytest.raises(ValidationError):
        sieve_weighted_sum(TWO_SQ, L2, [25], BoxSpec(25, 2), plan, q=9)


def test_q_restriction_filters_products():
    plan = SievePlan(2, 25, 30.0)
    full = sieve_weighted_sum(TWO_SQ, L2, [25], BoxSpec(25, 2), plan)
    assert sieve_weighted_sum(TWO_SQ, L2, [25], BoxSpec(25, 2), plan, q=3) == full
    assert sieve_weighted_sum(TWO_SQ, L2, [25], BoxSpec(25, 2), plan, q=5) == 0.0
