"""Budgeted maximization via Lagrangian binary search.

Given an approximate oracle for max (w - rho*h)' y over a polytope P, finds y
with w'y >= (1-delta)*f1 and h'y <= f2 (equality when two oracle outputs are
mixed), provided some point of P satisfies both w'y >= f1 and h'y <= f2.
Returns None ("FAIL") when even the final combination falls short of
(1-delta)*f1 -- the caller's signal that f1 (the running target beta) is set
too high.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass
class BudgetedSolution:
    y: np.ndarray
    rho_minus: float
    rho_plus: float
    mix_a: float          # weight of the over-budget endpoint; 0 if unmixed
    w_value: float
    h_value: float
    calls: int


def max_calls(delta) -> int:
    return math.ceil(math.log2(2 / float(delta))) + 1


def solve_budgeted(
    oracle: Callable[[float], np.ndarray],
    w: np.ndarray,
    h: np.ndarray,
    f1: float,
    f2: float,
    delta: float,
) -> Optional[BudgetedSolution]:
    w = np.asarray(w, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("budget costs must be nonnegative")
    delta = float(delta)
    cap = max_calls(delta)

    if f1 <= 0:
        y = np.zeros_like(w)
        return BudgetedSolution(y, 0.0, 0.0, 0.0, 0.0, 0.0, 0)

    if f2 <= 0:
        # degenerate budget: only edges with zero cost may carry anything,
        # which a single oracle call at a prohibitive rho enforces
        pos = h[h > 0]
        rho = 0.0 if pos.size == 0 else float(np.max(w) / np.min(pos)) + 1.0
        y = np.asarray(oracle(rho), dtype=float)
        hv = float(h @ y)
        assert hv <= 1e-12 * max(1.0, float(np.abs(w) @ np.abs(y)))
        wv = float(w @ y)
        if wv < (1 - delta) * f1:
            return None
        return BudgetedSolution(y, rho, rho, 0.0, wv, hv, 1)

    calls = 1
    y0 = np.asarray(oracle(0.0), dtype=float)
    if float(h @ y0) <= f2:
        wv = float(w @ y0)
        if wv < (1 - delta) * f1:
            return None
        return BudgetedSolution(y0, 0.0, 0.0, 0.0, wv, float(h @ y0), calls)

    rho_lo, y_lo = 0.0, y0                    # h'y_lo > f2 throughout
    rho_hi, y_hi = f1 / f2, np.zeros_like(w)  # h'y_hi <= f2 throughout
    # halve a counted number of times rather than comparing widths, so float
    # rounding at exact power-of-two ratios cannot cost an extra call
    halvings = math.ceil(math.log2(2 / delta))
    for _ in range(halvings):
        mid = (rho_lo + rho_hi) / 2
        calls += 1
        assert calls <= cap, "bisection exceeded its invocation budget"
        y = np.asarray(oracle(mid), dtype=float)
        if float(h @ y) > f2:
            rho_lo, y_lo = mid, y
        else:
            rho_hi, y_hi = mid, y

    h_lo, h_hi = float(h @ y_lo), float(h @ y_hi)
    a = (f2 - h_hi) / (h_lo - h_hi)
    assert 0 <= a <= 1
    y = a * y_lo + (1 - a) * y_hi
    wv = float(w @ y)
    if wv < (1 - delta) * f1:
        return None
    return BudgetedSolution(y, rho_lo, rho_hi, a, wv, float(h @ y), calls)
