"""Linear expressions over named variables.

A LinExpr is ``sum(coeffs[v] * v) + const``. It is the one shape shared by
region constraints, exponent arguments, and deterministic equations, so it is
kept deliberately small: construction canonicalizes (near-zero coefficients
are dropped, keys are sorted) and every operation returns a new value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .config import ZERO_EPS
from .errors import InvalidPoint, NonInvertibleEquation


@dataclass(frozen=True)
class LinExpr:
    coeffs: Mapping[str, float] = field(default_factory=dict)
    const: float = 0.0

    def __post_init__(self) -> None:
        clean = {
            v: float(c)
            for v, c in sorted(self.coeffs.items())
            if abs(c) > ZERO_EPS
        }
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "const", float(self.const))

    @staticmethod
    def var(name: str, coeff: float = 1.0) -> LinExpr:
        return LinExpr({name: coeff})

    @staticmethod
    def constant(value: float) -> LinExpr:
        return LinExpr({}, value)

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(self.coeffs)

    def coeff(self, v: str) -> float:
        return self.coeffs.get(v, 0.0)

    def is_constant(self) -> bool:
        return not self.coeffs

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.coeffs.items())

    def __add__(self, other: LinExpr | float) -> LinExpr:
        if isinstance(other, (int, float)):
            return LinExpr(self.coeffs, self.const + other)
        merged = dict(self.coeffs)
        for v, c in other.coeffs.items():
            merged[v] = merged.get(v, 0.0) + c
        return LinExpr(merged, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> LinExpr:
        return LinExpr({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other: LinExpr | float) -> LinExpr:
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other: float) -> LinExpr:
        return (-self) + float(other)

    def __mul__(self, k: float) -> LinExpr:
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def evaluate(self, point: Mapping[str, float]) -> float:
        total = self.const
        for v, c in self.coeffs.items():
            if v not in point:
                raise InvalidPoint(f"point is missing variable {v!r}")
            total += c * point[v]
        return total

    def evaluate_cols(self, cols: Mapping[str, np.ndarray]) -> np.ndarray:
        """Vectorized evaluate over equally long coordinate arrays."""
        n = len(next(iter(cols.values())))
        total = np.full(n, self.const)
        for v, c in self.coeffs.items():
            if v not in cols:
                raise InvalidPoint(f"columns are missing variable {v!r}")
            total += c * cols[v]
        return total

    def substitute(self, v: str, repl: LinExpr) -> LinExpr:
        """Replace v by the expression repl (repl must not mention v)."""
        a = self.coeffs.get(v)
        if a is None:
            return self
        rest = LinExpr({u: c for u, c in self.coeffs.items() if u != v}, self.const)
        return rest + repl * a

    def solve_for(self, v: str) -> LinExpr:
        """Rewrite ``self == 0`` as ``v == <result>``."""
        a = self.coeffs.get(v, 0.0)
        if abs(a) <= ZERO_EPS:
            raise NonInvertibleEquation(
                f"coefficient of {v!r} is {a}, cannot solve"
            )
        rest = LinExpr({u: c for u, c in self.coeffs.items() if u != v}, self.const)
        return rest * (-1.0 / a)

    def __repr__(self) -> str:
        parts = [f"{c:+g}*{v}" for v, c in self.coeffs.items()]
        parts.append(f"{self.const:+g}")
        return "".join(parts)
