"""Golden-section maximization of a unimodal scalar function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GoldenResult:
    x: float
    fx: float
    lo: float
    hi: float
    n_eval: int


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = 1e-4,
    max_iter: int = 200,
) -> GoldenResult:
    """Maximize ``f`` on ``[lo, hi]`` until ``hi - lo <= rel_tol * midpoint``.

    ``f`` may return ``-inf`` for points it cannot evaluate; they simply lose
    every comparison.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    n_eval = 2
    for _ in range(max_iter):
        if b - a <= rel_tol * 0.5 * (a + b):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        n_eval += 1
    x = 0.5 * (a + b)
    fx = f(x)
    # the midpoint can lose to an interior probe on a flat top
    best = max((fx, x), (fc, c), (fd, d))
    return GoldenResult(x=best[1], fx=best[0], lo=a, hi=b, n_eval=n_eval + 1)
