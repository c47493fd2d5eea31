from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from almostprime import padic
from almostprime.arith import primes_upto
from almostprime.errors import ValidationError
from almostprime.fixtures import product_form, split_quaternary, sum_of_squares
from almostprime.forms import FormSystem, LinearFamily, evaluate, jacobian_mod_p
from almostprime.grid import residue_grid

X1X2 = product_form()
SQ3 = sum_of_squares(3)
SQ5 = sum_of_squares(5)


def test_sigma_examples():
    assert padic.sigma_p_l(X1X2, [1], 3, 1).value == Fraction(2, 3)
    assert padic.sigma_p_l(X1X2, [1], 3, 2).value == Fraction(2, 3)
    assert padic.sigma_p_l(X1X2, [1], 3, 0).value == 1


def test_stabilization_flags():
    d = padic.sigma_p_stabilized(X1X2, [1], 3)
    assert d.value == Fraction(2, 3) and d.stabilized and d.level == 2
    d = padic.sigma_p_stabilized(SQ3, [1], 5, l_max=2)
    assert d.stabilized and d.level == 2
    sq = FormSystem.from_monomials(1, [[(1, (2,))]])
    d = padic.sigma_p_stabilized(sq, [0], 3, l_max=2)
    assert not d.stabilized


def test_sigma_star_examples():
    F = sum_of_squares(2)
    L = LinearFamily.coordinates(2, [0, 1])
    assert padic.sigma_star_p(F, L, [2], 3, 1).value == 3
    assert padic.sigma_star_p(F, L, [1], 3, 1).value == 0
    empty = LinearFamily.from_rows([], 2)
    assert padic.sigma_star_p(F, empty, [2], 5, 2).value == padic.sigma_p_l(F, [2], 5, 2).value


def test_nonsingular_lemma_levels_1_to_3():
    for F in (X1X2, SQ3):
        for p in (3, 5):
            for X in residue_grid(p, F.n):
                for s in X.tolist():
                    if jacobian_mod_p(F, s, p)[1] < F.r:
                        continue
                    v = evaluate(F, s, p)
                    for l in (1, 2, 3):
                        assert padic.sigma_p_l(F, v, p, l, p, s, method="brute").value == p**F.r


def test_hybrid_examples():
    d = padic.hybrid_sigma(X1X2, [0], 5, [0, 1])
    assert d.value == 5 and d.route == "nonsingular"
    fallback = padic.hybrid_sigma(SQ3, [0], 3, [0, 0, 0])
    assert fallback.value == padic.sigma_p_l(SQ3, [0], 3, 2, 3, [0, 0, 0], method="brute").value
    assert padic.hybrid_sigma(X1X2, [1], 5, [0, 1]).value == 0


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_diagonal_route_matches_brute(p):
    F = FormSystem.diagonal([1, 2, -1])
    L = LinearFamily.coordinates(3, [0, 2])
    for v in (0, 1, 3):
        for l in (1, 2):
            for D, s in ((1, [0, 0, 0]), (p, [1, 0, 2]), (2 * p, [1, 1, 0])):
                a = padic.count_mod(F, [v], p, l, D, s, method="diagonal")[0]
                b = padic.count_mod(F, [v], p, l, D, s, method="brute")[0]
                assert a == b
            a = padic.count_mod(F, [v], p, l, L=L, unit_prime=True, method="diagonal")[0]
            b = padic.count_mod(F, [v], p, l, L=L, unit_prime=True, method="brute")[0]
            assert a == b


def test_gamma_p_examples():
    L = LinearFamily.coordinates(5, [0, 1])
    g3 = padic.gamma_p(SQ5, L, [1], 3, 2).value
    assert g3 == Fraction(7, 15)
    assert g3 == padic.gamma_p_brute(SQ5, L, [1], 3, 2)
    assert abs(g3 - Fraction(2, 3)) <= Fraction(10, 9)
    g5 = padic.gamma_p(split_quaternary(), LinearFamily.coordinates(4, [0]), [1], 5, 2).value
    assert g5 == Fraction(1, 6)
    assert g5 == padic.gamma_p_brute(split_quaternary(), LinearFamily.coordinates(4, [0]), [1], 5, 2)


def test_gamma_empty_sum_is_zero():
    F = sum_of_squares(2)
    L = LinearFamily.from_rows([[1, -1]])
    # p | x1 - x2 means x1 = x2, then 2 x1^2 = 1 mod 3 has no solution
    assert padic.gamma_p(F, L, [1], 3, 2).value == 0


def test_gamma_decay_table():
    L = LinearFamily.coordinates(5, [0, 1])
    for p in (3, 5, 7, 11, 13):
        g = padic.gamma_p(SQ5, L, [1], p, 2).value
        assert p * p * abs(float(g) - 2 / p) <= 10


def test_gamma_D_multiplicative_and_direct():
    F = sum_of_squares(2)
    L = LinearFamily.coordinates(2, [0, 1])
    assert padic.gamma_D(F, L, [2], 1) == 1
    g3 = padic.gamma_D(F, L, [2], 3)
    g5 = padic.gamma_D(F, L, [2], 5)
    assert g3 == padic.gamma_p(F, L, [2], 3).value
    assert padic.gamma_D(F, L, [2], 15) == g3 * g5
    assert padic.gamma_D_direct(F, L, [2], 15) == g3 * g5
    assert padic.gamma_D_direct(F, L, [2], 21) == padic.gamma_D(F, L, [2], 21)
    with pytest.raises(ValidationError):
        padic.gamma_D(F, L, [2], 12)


def test_local_factor_identity_examples():
    F = X1X2
    for s0 in range(3):
        for b0 in range(2):
            s, b = [s0, 1], [b0, 1]
            t = [(s0 * 4 + b0 * 3) % 6, 1]
            assert padic.local_factor_identities(F, [1], 7, 3, 2, t, s, b) == (True, None, None)
            assert padic.local_factor_identities(F, [1], 3, 3, 2, t, s, b) == (None, True, None)
            assert padic.local_factor_identities(F, [1], 2, 3, 2, t, s, b) == (None, None, True)
    with pytest.raises(ValidationError):
        padic.local_factor_identities(F, [1], 3, 3, 2, [0, 0], [1, 1], [0, 0])


@pytest.mark.parametrize("p", [3, 5])
def test_aggregation_identity(p):
    for F, L, v in (
        (sum_of_squares(2), LinearFamily.coordinates(2, [0, 1]), [2]),
        (X1X2, LinearFamily.coordinates(2, [0]), [1]),
        (SQ3, LinearFamily.coordinates(3, [0, 1]), [1]),
    ):
        for l in (1, 2):
            assert padic.aggregate_sigma_star(F, L, v, p, l) == padic.sigma_star_p(F, L, v, p, l).value


def test_sigma_tends_to_one():
    worst = 0.0
    for p in primes_upto(50)[1:]:
        d = padic.sigma_p_l(SQ5, [1], p, 2).value
        assert d >= 0
        worst = max(worst, abs(float(d) - 1) * p)
    # fitted constant: |sigma_p - 1| <= C/p
    assert worst <= 2.0


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(0, 4), st.sampled_from([1, 2]))
def test_densities_nonnegative_rationals(p, v, l):
    d = padic.sigma_p_l(split_quaternary(), [v], p, l)
    assert isinstance(d.value, Fraction) and d.value >= 0
    assert (d.value * Fraction(p ** (l * 3))).denominator == 1
