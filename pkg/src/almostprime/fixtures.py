"""Small form systems used by the verification suite and the CLI examples."""

from __future__ import annotations

from .forms import FormSystem, LinearFamily


def product_form() -> FormSystem:
    """x1 x2"""
    return FormSystem.from_monomials(2, [[(1, (1, 1))]])


def sum_of_squares(n: int) -> FormSystem:
    return FormSystem.diagonal([1] * n)


def split_quaternary() -> FormSystem:
    """x1 x2 + x3 x4"""
    return FormSystem.from_monomials(4, [[(1, (1, 1, 0, 0)), (1, (0, 0, 1, 1))]])


def indefinite_quinary() -> FormSystem:
    """x1^2 + x2^2 + x3^2 - x4^2 - x5^2"""
    return FormSystem.diagonal([1, 1, 1, -1, -1])


def single_square() -> FormSystem:
    return FormSystem.from_monomials(1, [[(1, (2,))]])


FIXTURES = {
    "x1x2": product_form,
    "two_squares": lambda: sum_of_squares(2),
    "three_squares": lambda: sum_of_squares(3),
    "five_squares": lambda: sum_of_squares(5),
    "x1x2+x3x4": split_quaternary,
    "quinary_indefinite": indefinite_quinary,
    "x^2": single_square,
}


def fixture(name: str) -> FormSystem:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None


def first_two_coordinates(n: int) -> LinearFamily:
    return LinearFamily.coordinates(n, [0, 1])
