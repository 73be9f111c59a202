"""Derivative-free maximizers: golden-section line search and compass pattern search."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6):
    """Maximize a unimodal ``f`` on [lo, hi] until the bracket is narrower than ``tol``.

    Returns:
        (x, f(x)) at the best point seen, the bracket ends included.
    """
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    candidates = [(c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))]
    # ties go to the smaller abscissa
    return max(candidates, key=lambda t: (t[1], -t[0]))


def grid_then_golden(f, lo: float, hi: float, step: float, tol: float):
    """Grid search for the best cell, then golden-section refinement inside its neighbours."""
    xs = np.arange(lo, hi + 0.5 * step, step)
    xs = xs[xs <= hi + 1e-12]
    values = np.array([f(x) for x in xs])
    # first index among (near-)ties: smallest x wins
    i = int(np.flatnonzero(values >= values.max() - 1e-12)[0])
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, len(xs) - 1)]
    x, fx = golden_section_max(f, left, right, tol)
    if values[i] > fx:
        return float(xs[i]), float(values[i])
    return float(x), float(fx)


def pattern_search_max(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    step: float,
    min_step: float,
):
    """Compass search: try +/- step along each axis, halve the step when nothing improves."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    while step >= min_step:
        improved = False
        for j in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[j] += sign * step
                fy = f(y)
                if fy > fx + 1e-15:
                    x, fx, improved = y, fy, True
        if not improved:
            step /= 2.0
    return x, fx
