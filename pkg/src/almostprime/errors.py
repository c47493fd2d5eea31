"""Exception types shared across the package.

Every refusal carries enough structure for the CLI to serialize it.
"""

from __future__ import annotations


class AlmostPrimeError(Exception):
    """Base class for all package errors."""

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ValidationError(AlmostPrimeError, ValueError):
    """Bad input: wrong dimensions, non-prime modulus, unmet precondition."""


class BudgetExceeded(AlmostPrimeError):
    """An enumeration would exceed the configured step ceiling."""

    def __init__(self, what: str, required: int, ceiling: int):
        self.what = what
        self.required = int(required)
        self.ceiling = int(ceiling)
        super().__init__(
            f"{what}: needs ~{self.required:.3e} steps, ceiling is {self.ceiling:.3e}"
        )

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(what=self.what, required=self.required, ceiling=self.ceiling)
        return d


class StructureError(AlmostPrimeError):
    """A fast path does not apply to this system; the caller should fall back."""


DEFAULT_BUDGET = 10**9


def check_budget(what: str, required: int, ceiling: int | None) -> None:
    limit = DEFAULT_BUDGET if ceiling is None else ceiling
    if required > limit:
        raise BudgetExceeded(what, required, limit)
