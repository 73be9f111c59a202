"""
Observable consequences of the one-parameter noise model: coincidence
fringes, entanglement visibility, and the conversion between the mixing
weight p and visibility.

A fringe is recorded by holding one analyzer at a fixed orientation and
rotating the other. Its visibility is (P_max - P_perp) / (P_max + P_perp),
where P_perp is the coincidence probability with the rotating analyzer
turned 90 degrees from the fringe maximum. Entanglement visibility is the
lowest such fringe visibility over fixed orientations.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .analyzer import outcome_vectors
from .qstate import make_noisy_state, outcome_index
from .search import golden_section_max, grid_then_golden

EXTREMUM_TOL = 1e-6


@dataclass(frozen=True)
class FringeScan:
    fixed_side: str
    fixed_angle: float
    fixed_outcome: int
    scanned_outcome: int
    theta: np.ndarray
    probability: np.ndarray

    def visibility(self) -> float:
        """Contrast of the sampled fringe between its maximum and the crossed orientation."""
        i = int(np.argmax(self.probability))
        perp = _wrap(self.theta[i] + 90.0)
        j = int(np.argmin(np.abs(_wrap(self.theta - perp))))
        hi, lo = self.probability[i], self.probability[j]
        return float((hi - lo) / (hi + lo))

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["theta_deg", "probability"])
        for t, prob in zip(self.theta, self.probability):
            writer.writerow([f"{t:.10g}", f"{prob:.10g}"])


def _wrap(angle):
    return (np.asarray(angle) + 90.0) % 180.0 - 90.0


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    return p


@functools.lru_cache(maxsize=256)
def _noisy_rho(p: float) -> np.ndarray:
    rho = make_noisy_state(p).density().reshape(3, 3, 3, 3)
    rho.setflags(write=False)
    return rho


def _scanned_side_operator(p, fixed_angle, fixed_outcome, fixed_side) -> np.ndarray:
    """Real 3x3 form M with P(theta) = w(theta) . M . w(theta) for the scanned-side outcome vector w."""
    rho = _noisy_rho(_check_p(p))
    u = outcome_vectors(fixed_angle)[outcome_index(fixed_outcome)]
    if fixed_side == "alice":
        m = np.einsum("i,ijkl,k->jl", u, rho, u)
    elif fixed_side == "bob":
        m = np.einsum("j,ijkl,l->ik", u, rho, u)
    else:
        raise ValueError(f"fixed_side must be 'alice' or 'bob', got {fixed_side!r}")
    return np.real(m)


def _quadratic(m: np.ndarray, theta, scanned_outcome: int):
    w = outcome_vectors(theta)[..., outcome_index(scanned_outcome), :]
    return np.einsum("...j,jl,...l->...", w, m, w)


def fringe_probability(
    p: float,
    fixed_angle: float,
    theta,
    fixed_outcome: int = 1,
    scanned_outcome: int = -1,
    fixed_side: str = "alice",
):
    """Coincidence probability of (fixed_outcome, scanned_outcome) as the free analyzer turns.

    Vectorized over ``theta`` (degrees).
    """
    m = _scanned_side_operator(p, fixed_angle, fixed_outcome, fixed_side)
    return _quadratic(m, np.asarray(theta, dtype=float), scanned_outcome)


def fringe_scan(
    p: float,
    fixed_angle: float,
    step: float,
    fixed_outcome: int = 1,
    scanned_outcome: int = -1,
    fixed_side: str = "alice",
) -> FringeScan:
    """Sample a fringe on theta in [-90, 90] with the given step (degrees, 0 < step <= 5)."""
    p = _check_p(p)
    if not 0.0 < step <= 5.0:
        raise ValueError(f"step must lie in (0, 5] degrees, got {step!r}")
    n = int(round(180.0 / step))
    theta = np.linspace(-90.0, 90.0, n + 1) if np.isclose(n * step, 180.0) else np.arange(-90.0, 90.0 + 1e-9, step)
    prob = fringe_probability(p, fixed_angle, theta, fixed_outcome, scanned_outcome, fixed_side)
    return FringeScan(
        fixed_side, float(fixed_angle), fixed_outcome, scanned_outcome, theta, np.clip(prob, 0.0, 1.0)
    )


def _extremum(prob, sign: float) -> tuple[float, float]:
    """Locate max (sign=+1) or min (sign=-1) of a 180-degree-periodic fringe."""
    grid = np.arange(-90.0, 90.0, 1.0)
    values = sign * prob(grid)
    i = int(np.argmax(values))
    t, v = golden_section_max(lambda x: sign * float(prob(x)), grid[i] - 1.0, grid[i] + 1.0, EXTREMUM_TOL)
    return t, sign * v


def fringe_visibility(
    p: float,
    fixed_angle: float,
    mode: str = "crossed",
    fixed_outcome: int = 1,
    scanned_outcome: int = -1,
    fixed_side: str = "alice",
) -> float:
    """Visibility of a single fringe.

    ``mode="crossed"`` compares the maximum with the orthogonal orientation
    (the definition used for entanglement visibility). ``mode="global"``
    compares the global maximum and minimum of the fringe, kept for
    diagnostics.
    """
    m = _scanned_side_operator(p, fixed_angle, fixed_outcome, fixed_side)

    def prob(t):
        return _quadratic(m, t, scanned_outcome)

    t_max, p_max = _extremum(prob, 1.0)
    if mode == "crossed":
        p_min = float(prob(t_max + 90.0))
    elif mode == "global":
        p_min = _extremum(prob, -1.0)[1]
    else:
        raise ValueError(f"unknown visibility mode {mode!r}")
    return float((p_max - p_min) / (p_max + p_min))


def _coarse_crossed_visibility(p: float, fixed_angles: np.ndarray) -> np.ndarray:
    """Crossed visibility on a 1-degree theta grid for many fixed orientations at once."""
    rho = _noisy_rho(p)
    u = outcome_vectors(fixed_angles)[:, outcome_index(1), :]
    m = np.real(np.einsum("fi,ijkl,fk->fjl", u, rho, u))
    theta = np.arange(-90.0, 90.0, 1.0)  # crossed partner of theta[i] is theta[(i + 90) % 180]
    w = outcome_vectors(theta)[:, outcome_index(-1), :]
    prob = np.einsum("tj,fjl,tl->ft", w, m, w)
    i = np.argmax(prob, axis=1)
    rows = np.arange(len(fixed_angles))
    hi, lo = prob[rows, i], prob[rows, (i + 90) % 180]
    return (hi - lo) / (hi + lo)


def visibility_with_angle(p: float, mode: str = "crossed") -> tuple[float, float]:
    """Lowest fringe visibility over fixed orientations in [0, 90] and the orientation attaining it.

    A 1-degree grid over the fixed orientation is refined to 0.01 degree
    around its lowest cell.
    """
    p = _check_p(p)

    def neg_vis(f):
        return -fringe_visibility(p, f, mode)

    if mode != "crossed":
        angle, value = grid_then_golden(neg_vis, 0.0, 90.0, 1.0, 0.01)
        return -value, angle
    fixed = np.arange(0.0, 91.0, 1.0)
    coarse = _coarse_crossed_visibility(p, fixed)
    k = int(np.flatnonzero(coarse <= coarse.min() + 1e-12)[0])
    lo, hi = fixed[max(k - 1, 0)], fixed[min(k + 1, len(fixed) - 1)]
    angle, value = golden_section_max(neg_vis, lo, hi, 0.01)
    at_grid = neg_vis(fixed[k])
    if at_grid >= value:
        return -at_grid, float(fixed[k])
    return -value, float(angle)


def visibility(p: float) -> float:
    """Entanglement visibility of the noisy state with pure weight ``p``."""
    return visibility_with_angle(p)[0]


def visibility_closed_form(p: float) -> float:
    """4p / (3 + p): crossed-fringe visibility at fixed orientation 45 degrees."""
    p = _check_p(p)
    return 4.0 * p / (3.0 + p)


def p_from_visibility(v: float, tol: float = 1e-6) -> float:
    """Invert :func:`visibility` by bisection.

    Raises:
        ValueError: if ``v`` lies outside the range [0, 1] covered by p in [0, 1].
    """
    v = float(v)
    if not np.isfinite(v) or not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility {v!r} outside the invertible range [0, 1]")
    if v >= visibility(1.0):
        return 1.0
    if v <= visibility(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if visibility(mid) < v:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
