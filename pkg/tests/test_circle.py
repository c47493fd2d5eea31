import math
import random
from fractions import Fraction

import numpy as np
import pytest

from almostprime import circle, padic
from almostprime.arith import primes_upto
from almostprime.errors import BudgetExceeded
from almostprime.fixtures import (
    indefinite_quinary,
    product_form,
    single_square,
    split_quaternary,
    sum_of_squares,
)
from almostprime.forms import FormSystem

X2 = single_square()


def test_exp_sum_examples():
    F = sum_of_squares(2)
    assert circle.exp_sum(F, 1, [0, 0], [0], 7) == pytest.approx(49)
    assert abs(circle.exp_sum(X2, 1, [0], [Fraction(1, 2)], 4)) < 1e-12
    assert abs(circle.exp_sum(X2, 1, [0], [0.5], 4)) < 1e-12


def test_exp_sum_full_residue_system_is_gauss_sum():
    for F in (X2, product_form(), sum_of_squares(3)):
        for d, q in ((1, 5), (2, 3), (3, 4)):
            s = [1] * F.n
            for a in range(q):
                alpha = [Fraction(a, q)] * F.r
                S = circle.exp_sum(F, d, s, alpha, d * q)
                G = circle.gauss_sum(F, [a], q, d, s)
                assert abs(S - G) <= 1e-9
                # float phases agree with exact reduction
                Sf = circle.exp_sum(F, d, s, [a / q], d * q)
                assert abs(S - Sf) <= 1e-9


def test_exp_sum_trivial_bound():
    rng = random.Random(0)
    F = split_quaternary()
    for _ in range(10):
        a = rng.random()
        assert abs(circle.exp_sum(F, 1, [0] * 4, [a], 6)) <= 6**4 + 1e-9


def test_gauss_sum_examples():
    assert circle.gauss_sum(X2, [1], 1) == pytest.approx(1)
    assert abs(circle.gauss_sum(X2, [1], 2)) < 1e-12
    assert abs(circle.gauss_sum(X2, [1], 5)) == pytest.approx(math.sqrt(5), abs=1e-9)


def test_gauss_magnitude_all_odd_primes():
    for p in primes_upto(50)[1:]:
        for a in range(1, p):
            assert abs(abs(circle.gauss_sum(X2, [a], p)) - math.sqrt(p)) <= 1e-9


@pytest.mark.parametrize("F", [product_form(), sum_of_squares(3), split_quaternary()], ids=["x1x2", "sq3", "quat"])
@pytest.mark.parametrize("p", [2, 3, 5])
def test_local_factor_via_gauss(F, p):
    for l in (0, 1, 2):
        for d in (1, p):
            for s in ([0] * F.n, [1] + [0] * (F.n - 1), [1] * F.n):
                for v in (0, 1, 2):
                    a = circle.local_factor_via_gauss(F, [v], p, l, d, s)
                    b = padic.sigma_p_l(F, [v], p, l, d, s).value
                    assert abs(a - float(b)) <= 1e-9


def test_local_factor_examples():
    assert circle.local_factor_via_gauss(product_form(), [1], 3, 1) == pytest.approx(2 / 3, abs=1e-12)
    assert circle.local_factor_via_gauss(product_form(), [1], 3, 0) == 1.0


def test_weyl_rhs_alpha_zero():
    F = sum_of_squares(2)
    N1 = 3.0
    expected = N1 ** (-4) * 7**2 * N1**2
    assert circle.weyl_rhs(F, 1, [0.0], N1) == pytest.approx(expected)
    assert circle.weyl_rhs(F, 1, [0.0], N1) >= 1


def test_weyl_rhs_hand_expansion_x1x2():
    # Phi(h) = (h2, h1); N1 = 2, alpha = 1/3
    F = product_form()
    alpha = 1 / 3
    terms = []
    for h1 in range(-2, 3):
        for h2 in range(-2, 3):
            prod = 1.0
            for hj in (h2, h1):
                x = alpha * hj
                dist = abs(x - round(x))
                prod *= 2.0 if dist == 0 else min(2.0, 1 / dist)
            terms.append(prod)
    assert circle.weyl_rhs(F, 1, [alpha], 2.0) == pytest.approx(math.fsum(terms) / 16)


def test_weyl_inequality_constant():
    # |N1^-n S|^2 <= C * rhs on tiny random instances; C is fitted, not assumed
    rng = random.Random(4)
    ratios = []
    for _ in range(30):
        n = rng.randint(1, 3)
        monos = [(rng.randint(1, 3), tuple(2 if j == i else 0 for j in range(n))) for i in range(n)]
        F = FormSystem.from_monomials(n, [monos])
        N1 = rng.randint(2, 8 if n < 3 else 5)
        alpha = rng.random()
        lhs = abs(circle.exp_sum(F, 1, [0] * n, [alpha], N1) / N1**n) ** 2
        rhs = circle.weyl_rhs(F, 1, [alpha], float(N1))
        ratios.append(lhs / rhs)
    C = max(ratios)
    assert C < 10


def test_major_arcs():
    P = circle.MajorArcParams(theta=0.3, N1=100.0, r=1, k=2)
    assert P.kappa == pytest.approx(0.3)
    assert circle.major_arc_membership([0.0], P) == ((0,), 1)
    assert circle.major_arc_membership([0.5], P) == ((1,), 2)
    assert circle.major_arc_membership([1 / 3], P) == ((1,), 3)
    # golden-ratio point: continued fraction denominators are Fibonacci, far from small q
    phi = (math.sqrt(5) - 1) / 2
    assert circle.major_arc_membership([phi], P) is None


def test_singular_series_examples():
    F = sum_of_squares(5)
    assert circle.singular_series(F, [0], Q_max=1).value == pytest.approx(1)
    ss = circle.singular_series(F, [0], Q_max=20)
    assert abs(ss.value.imag) <= 1e-8
    prod, _ = padic.local_product(F, [0], primes_upto(20), cap=400)
    assert abs(ss.value.real - prod) <= 3 * ss.tail_proxy + 0.05


def test_singular_series_against_local_product_quinary():
    F = indefinite_quinary()
    ss = circle.singular_series(F, [0], Q_max=30)
    prod, _ = padic.local_product(F, [0], primes_upto(30), cap=4096)
    assert abs(ss.value.real - prod) <= 10 * ss.tail_proxy


def test_singular_integral_examples():
    F = sum_of_squares(2)
    J = circle.singular_integral_J(F, [0.5], samples=10**6, seed=0)
    assert abs(J.value - math.pi / 4) / (math.pi / 4) <= 0.02
    J2 = circle.singular_integral_J(F, [0.5], samples=10**6, seed=9)
    assert abs(J.value - J2.value) <= 3 * math.hypot(J.stderr, J2.stderr)
    assert circle.singular_integral_J(F, [3.0], samples=10**5).value == 0.0
    assert circle.oscillatory_integral_I(F, [0.0]) == pytest.approx(1, abs=1e-12)


def test_singular_integral_reproducible():
    F = sum_of_squares(3)
    a = circle.singular_integral_J(F, [1.0], samples=200_000, seed=5)
    b = circle.singular_integral_J(F, [1.0], samples=200_000, seed=5)
    assert a.value == b.value and a.halved_value == b.halved_value


def test_oscillatory_route_agrees_with_slab():
    F = sum_of_squares(2)
    J = circle.singular_integral_J(F, [0.5], method="oscillatory", Phi=40.0)
    assert J.value == pytest.approx(math.pi / 4, rel=0.02)


def test_oscillatory_I_matches_generic_grid():
    # tensor-grid route on a non-diagonal form
    F = FormSystem.from_monomials(2, [[(1, (2, 0)), (1, (1, 1))]])
    g = 0.7
    direct = circle.oscillatory_integral_I(F, [g], nodes=80)
    x, w = np.polynomial.legendre.leggauss(80)
    x, w = (x + 1) / 2, w / 2
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    ref = np.sum(W * np.exp(2j * np.pi * g * (X1**2 + X1 * X2)))
    assert abs(direct - ref) <= 1e-12


def test_birch_prediction_examples():
    F = indefinite_quinary()
    zero = circle.birch_prediction(sum_of_squares(2), [5000], 40, samples=10**4)
    assert zero.value == 0.0
    P = circle.birch_prediction(F, [0], 40)
    assert abs(40407 / P.value - 1) <= 0.3


def test_birch_prediction_scaling_with_D():
    # prediction(N, D) D^n is D-independent once the local factor at p | D is level-matched
    F = indefinite_quinary()
    p = 3
    s = [1, 0, 0, 1, 0]
    assert padic.is_nonsingular(F, s, p)
    base = circle.birch_prediction(F, [0], 30, 1, None, P_max=13, samples=10**5)
    rest = base.local_product / float(padic.sigma_p_l(F, [0], p, padic.level_for(p)).value)
    restricted = circle.birch_prediction(F, [0], 30, p, s, P_max=13, J=base.J)
    # local factor at p is sigma_p(p, s, 0) = p^r by the nonsingular lemma
    assert restricted.local_factors[1]["value"] == str(p)
    assert restricted.value * p**5 == pytest.approx(base.J.value * 30**3 * rest * p, rel=1e-12)


def test_budget_guard():
    with pytest.raises(BudgetExceeded):
        circle.gauss_sum(split_quaternary(), [1], 101, budget=10**6)


@pytest.mark.parametrize("q, d", [(6, 1), (9, 2), (8, 3)])
def test_diagonal_histogram_matches_enumeration(q, d):
    F = FormSystem.diagonal([1, -2, 3])
    s = [1, 0, 2]
    X = np.indices((q,) * 3).reshape(3, -1).T
    Y = (d * X + np.asarray(s)) % q
    vals = (Y[:, 0] ** 2 - 2 * Y[:, 1] ** 2 + 3 * Y[:, 2] ** 2) % q
    assert circle.value_histogram(F, q, d, s).tolist() == np.bincount(vals, minlength=q).tolist()
