"""Exact rational linear systems, solved by Gaussian elimination."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class SingularSystemError(Exception):
    """The system has no unique solution."""


@dataclass
class LinearSystem:
    """A square system A x = b over exact rationals."""

    matrix: list[list[Fraction]]
    rhs: list[Fraction]

    def solve(self) -> list[Fraction]:
        n = len(self.rhs)
        a = [row[:] for row in self.matrix]
        b = self.rhs[:]
        for col in range(n):
            pivot = next((r for r in range(col, n) if a[r][col]), None)
            if pivot is None:
                raise SingularSystemError(f"no pivot in column {col}")
            if pivot != col:
                a[col], a[pivot] = a[pivot], a[col]
                b[col], b[pivot] = b[pivot], b[col]
            inv = 1 / a[col][col]
            a[col] = [x * inv for x in a[col]]
            b[col] *= inv
            for r in range(n):
                if r != col and a[r][col]:
                    factor = a[r][col]
                    a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
                    b[r] -= factor * b[col]
        return b


def solve_linear(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    return LinearSystem(matrix, rhs).solve()
