"""Hyperplane-cut counts and the architecture bound on linear pieces."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .net import as_arch


@lru_cache(maxsize=None)
def cut_count(d: int, n: int) -> int:
    """Maximum number of parts ``n`` hyperplanes cut ``R^d`` into.

    ``sum_{i=0}^{min(d, n)} binomial(n, i)``. ``cut_count(0, n) == 1``.
    """
    if d < 0 or n < 0:
        raise ValueError("d and n must be nonnegative")
    return sum(math.comb(n, i) for i in range(min(d, n) + 1))


@dataclass(frozen=True)
class ComplexityBound:
    value: int
    log10: float

    @classmethod
    def of(cls, value: int) -> "ComplexityBound":
        return cls(value, _log10_int(value))

    def __int__(self):
        return self.value

    def to_dict(self) -> dict:
        return {"value": str(self.value), "log10": self.log10}


def _log10_int(value: int) -> float:
    # math.log10 accepts arbitrarily large ints without overflowing
    return math.log10(value) if value > 0 else float("-inf")


def network_bound(arch) -> ComplexityBound:
    """Upper bound ``prod_i C(w_{i-1}, w_i)`` on the linear pieces of a ReLU net."""
    widths = as_arch(arch).widths
    value = 1
    for w_in, w_out in zip(widths[:-1], widths[1:]):
        value *= cut_count(w_in, w_out)
    return ComplexityBound.of(value)
