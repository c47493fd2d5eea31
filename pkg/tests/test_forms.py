import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostprime.errors import ValidationError
from almostprime.fixtures import product_form, split_quaternary, sum_of_squares
from almostprime.forms import (
    FormSystem,
    LinearFamily,
    count_singular_points_mod_p,
    difference_identity_check,
    evaluate,
    jacobian_mod_p,
    multilinear_phi,
    pairwise_independent,
    rank_quadratic,
)


def test_evaluate_examples():
    assert evaluate(split_quaternary(), [1, 2, 3, 4]) == [14]
    assert evaluate(sum_of_squares(3), [1, 1, 1], 5) == [3]
    assert evaluate(split_quaternary(), [0, 0, 0, 0]) == [0]


def test_evaluate_dimension_mismatch():
    with pytest.raises(ValidationError):
        evaluate(sum_of_squares(3), [1, 2])


def test_inhomogeneous_rejected():
    with pytest.raises(ValidationError):
        FormSystem.from_monomials(2, [[(1, (2, 0)), (1, (1, 0))]])
    with pytest.raises(ValidationError):
        FormSystem.from_monomials(2, [[(1, (1, 0))]])


def test_jacobian_examples():
    F = sum_of_squares(3)
    assert jacobian_mod_p(F, [1, 0, 0], 5) == ([[2, 0, 0]], 1)
    assert jacobian_mod_p(F, [0, 0, 0], 5) == ([[0, 0, 0]], 0)
    assert jacobian_mod_p(product_form(), [0, 1], 3) == ([[1, 0]], 1)
    with pytest.raises(ValidationError):
        jacobian_mod_p(F, [1, 0, 0], 6)


@pytest.mark.parametrize(
    "rows, expected",
    [([[1, 0], [0, 1]], True), ([[1, 0], [2, 0]], False), ([[1, 1], [1, -1]], True)],
)
def test_pairwise_independent(rows, expected):
    assert pairwise_independent(LinearFamily.from_rows(rows)) is expected


def test_zero_linear_form_rejected():
    with pytest.raises(ValidationError):
        LinearFamily.from_rows([[0, 0]])


def test_multilinear_phi_examples():
    assert multilinear_phi(product_form(), [3, 7]) == [[7, 3]]
    assert multilinear_phi(sum_of_squares(2), [1, 1]) == [[2, 2]]
    cube = FormSystem.from_monomials(1, [[(1, (3,))]])
    assert multilinear_phi(cube, [1], [2]) == [[12]]


def test_difference_identity_examples():
    assert difference_identity_check(product_form(), [[2, 5]], [3, -4])
    assert difference_identity_check(sum_of_squares(2), [[1, -3]], [7, 2])


def _random_form(rng: random.Random) -> FormSystem:
    n = rng.randint(1, 4)
    k = rng.randint(2, 3)
    acc = {}
    for _ in range(rng.randint(1, 5)):
        e = [0] * n
        for _ in range(k):
            e[rng.randrange(n)] += 1
        acc[tuple(e)] = acc.get(tuple(e), 0) + rng.randint(-3, 3)
    monos = [(c, e) for e, c in acc.items() if c]
    if not monos:
        monos = [(1, (k,) + (0,) * (n - 1))]
    return FormSystem.from_monomials(n, [monos])


def test_difference_identity_random_forms():
    rng = random.Random(7)
    for _ in range(100):
        F = _random_form(rng)
        hs = [[rng.randint(-3, 3) for _ in range(F.n)] for _ in range(F.k - 1)]
        x = [rng.randint(-5, 5) for _ in range(F.n)]
        assert difference_identity_check(F, hs, x)


def test_phi_symmetric_in_h():
    rng = random.Random(3)
    for _ in range(30):
        F = _random_form(rng)
        if F.k < 3:
            continue
        h1 = [rng.randint(-3, 3) for _ in range(F.n)]
        h2 = [rng.randint(-3, 3) for _ in range(F.n)]
        assert multilinear_phi(F, h1, h2) == multilinear_phi(F, h2, h1)


def test_tensors_symmetric_and_integral_multiple():
    F = FormSystem.from_monomials(3, [[(2, (1, 1, 1)), (-1, (3, 0, 0)), (5, (0, 2, 1))]])
    T = F.tensors[0]
    assert T[0, 1, 2] == T[2, 1, 0] == Fraction(2, 6)
    assert all((6 * x).denominator == 1 for x in T.flat)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=4, max_size=4), st.integers(-6, 6))
def test_homogeneity(x, t):
    F = FormSystem.from_monomials(4, [[(1, (1, 1, 0, 0)), (-2, (0, 0, 2, 0))], [(3, (0, 1, 0, 1)), (1, (2, 0, 0, 0))]])
    assert evaluate(F, [t * a for a in x]) == [t**2 * a for a in evaluate(F, x)]


def test_evaluate_many_matches_scalar():
    rng = np.random.default_rng(0)
    F = split_quaternary()
    X = rng.integers(-100, 100, size=(50, 4))
    assert F.evaluate_many(X)[:, 0].tolist() == [evaluate(F, row)[0] for row in X.tolist()]
    assert F.evaluate_many(X, 97)[:, 0].tolist() == [evaluate(F, row, 97)[0] for row in X.tolist()]


def test_rank_quadratic_examples():
    assert rank_quadratic(sum_of_squares(5)) == 5
    assert rank_quadratic(product_form()) == 2
    assert rank_quadratic(FormSystem.from_monomials(3, [[(1, (2, 0, 0))]])) == 1
    with pytest.raises(ValidationError):
        rank_quadratic(FormSystem.from_monomials(1, [[(1, (3,))]]))


def _random_unimodular(rng: random.Random) -> np.ndarray:
    U = np.eye(3, dtype=np.int64)
    for _ in range(6):
        i, j = rng.sample(range(3), 2)
        E = np.eye(3, dtype=np.int64)
        E[i, j] = rng.choice([-2, -1, 1, 2])
        U = U @ E
    return U


def test_rank_invariant_under_unimodular_change():
    rng = random.Random(11)
    for A in ([[1, 0, 0], [0, 1, 0], [0, 0, 0]], [[2, 1, 0], [1, 2, 1], [0, 1, 2]], [[1, 1, 1], [1, 1, 1], [1, 1, 1]]):
        base = rank_quadratic(FormSystem.quadratic(A))
        for _ in range(5):
            U = _random_unimodular(rng)
            assert round(abs(np.linalg.det(U))) == 1
            B = (U.T @ np.asarray(A) @ U).tolist()
            assert rank_quadratic(FormSystem.quadratic(B)) == base


def test_singular_point_counts():
    assert count_singular_points_mod_p(sum_of_squares(3), [0], 3) == 1
    assert count_singular_points_mod_p(product_form(), [1], 3) == 0
    assert count_singular_points_mod_p(product_form(), [0], 3) == 1


def test_json_roundtrip():
    F = split_quaternary()
    assert FormSystem.from_json(F.to_json()) == F
    assert F.digest() == FormSystem.from_json(F.to_json()).digest()
