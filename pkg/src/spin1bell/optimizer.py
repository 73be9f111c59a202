"""Maximize S over analyzer settings and tabulate S against the angle spacing."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .analyzer import outcome_vectors
from .bell import VALUES, BellSettings, chsh
from .noisevis import visibility
from .qstate import JointState, make_noisy_state
from .search import golden_section_max, pattern_search_max

TIE_TOL = 1e-9
# S* approaches 2 as dphi -> 0 for every p, so "exceeds" needs a margin above rounding noise.
VIOLATION_MARGIN = 1e-12


@dataclass(frozen=True)
class SymmetricSettings:
    """Equally spaced settings, dphi = b - a = a' - b = b' - a', centred on ``center``."""

    dphi: float
    center: float = 0.0

    def expand(self) -> BellSettings:
        c, d = self.center, self.dphi
        return BellSettings(
            alpha=c - 1.5 * d,
            alpha_prime=c + 0.5 * d,
            beta=c - 0.5 * d,
            beta_prime=c + 1.5 * d,
        )


@dataclass(frozen=True)
class CurvePoint:
    dphi: float
    S: float
    visibility: float


def closed_form_pure_S(dphi):
    """S(dphi) = 2/3 + 2 cos(4 dphi) - (2/3) cos(12 dphi) for the pure singlet."""
    d = np.radians(dphi)
    return 2.0 / 3.0 + 2.0 * np.cos(4.0 * d) - (2.0 / 3.0) * np.cos(12.0 * d)


def _correlation_table(state: JointState, alphas, betas) -> np.ndarray:
    """E[i, j] for every (alphas[i], betas[j]) in one batched contraction."""
    rho = state.density().reshape(3, 3, 3, 3)
    # signed observable on each side: O(angle) = sum_o v(o) |o_angle><o_angle|
    oa = _signed_observable(alphas)
    ob = _signed_observable(betas)
    return np.real(np.einsum("aik,bjl,ijkl->ab", oa, ob, rho, optimize=True))


def _paired_correlations(rho4: np.ndarray, alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """E(alphas[n], betas[n]) elementwise."""
    oa = _signed_observable(alphas)
    ob = _signed_observable(betas)
    return np.real(np.einsum("nik,njl,ijkl->n", oa, ob, rho4, optimize=True))


def _signed_observable(angles) -> np.ndarray:
    u = outcome_vectors(np.atleast_1d(np.asarray(angles, dtype=float)))
    return np.einsum("o,noi,nok->nik", VALUES, u, u)


def symmetric_S(state: JointState, dphi, center: float = 0.0) -> np.ndarray:
    """Vectorized S over an array of spacings on the equally spaced family."""
    state.validate()
    d = np.atleast_1d(np.asarray(dphi, dtype=float))
    rho4 = state.density().reshape(3, 3, 3, 3)
    a, ap, b, bp = center - 1.5 * d, center + 0.5 * d, center - 0.5 * d, center + 1.5 * d
    e = [_paired_correlations(rho4, x, y) for x, y in ((a, b), (a, bp), (ap, b), (ap, bp))]
    return np.abs(e[0] - e[1] + e[2] + e[3])


def scan_dphi(p: float, start: float, stop: float, step: float, center: float = 0.0) -> list[CurvePoint]:
    """S on the equally spaced family for dphi in [start, stop] (degrees), inclusive."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    if n <= 0:
        raise ValueError(f"empty dphi range [{start}, {stop}]")
    dphi = start + step * np.arange(n)
    values = symmetric_S(make_noisy_state(p), dphi, center)
    vis = visibility(p)
    return [CurvePoint(float(d), float(v), float(vis)) for d, v in zip(dphi, values)]


def write_curve_csv(points: list[CurvePoint], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["dphi_deg", "S", "visibility"])
    for pt in points:
        writer.writerow([f"{pt.dphi:.10g}", f"{pt.S:.10g}", f"{pt.visibility:.10g}"])


def optimize_symmetric(p: float, center: float = 0.0) -> tuple[float, float]:
    """Best spacing dphi in (0, 45] for the noisy state and the S it reaches.

    0.25-degree grid, then golden-section refinement to 0.01 degree. Among
    grid points within 1e-9 of the best, the smallest dphi wins.
    """
    state = make_noisy_state(p)

    def s_of(d):
        return float(symmetric_S(state, d, center)[0])

    grid = np.arange(0.25, 45.0 + 1e-9, 0.25)
    values = symmetric_S(state, grid, center)
    i = int(np.flatnonzero(values >= values.max() - TIE_TOL)[0])
    lo = grid[i - 1] if i > 0 else 1e-6
    hi = grid[min(i + 1, len(grid) - 1)]
    d, s = golden_section_max(s_of, lo, hi, 0.01)
    if values[i] >= s:
        return float(grid[i]), float(values[i])
    return float(d), float(s)


def settings_center(settings: BellSettings) -> float:
    """Centre of a setting quadruple, respecting the 90-degree period of every correlation."""
    phases = np.exp(1j * np.radians(4.0 * np.array(settings.as_tuple())))
    return float(np.degrees(np.angle(phases.sum())) / 4.0)


def optimize_free(state: JointState, coarse_step: float = 2.0, min_step: float = 0.01):
    """Maximize S over all four angles independently.

    Correlations are 90-degree periodic in each angle, so a coarse grid on
    [0, 90) covers every setting; the best grid cell is polished by compass
    pattern search down to ``min_step`` degrees.

    Returns:
        (BellSettings with angles mapped to [-45, 45), S)
    """
    state.validate()
    angles = np.arange(0.0, 90.0, coarse_step)
    table = _correlation_table(state, angles, angles)
    best, best_idx = -np.inf, None
    for i in range(len(angles)):
        # axes: a', b, b'
        s = np.abs(
            table[i][None, :, None] - table[i][None, None, :] + table[:, :, None] + table[:, None, :]
        )
        k = int(np.argmax(s))
        if s.flat[k] > best + TIE_TOL:
            best = s.flat[k]
            best_idx = (i, *np.unravel_index(k, s.shape))
    i, ip, j, jp = best_idx
    x0 = [angles[i], angles[ip], angles[j], angles[jp]]
    x, s = pattern_search_max(lambda x: chsh(state, BellSettings(*x)), x0, coarse_step / 2, min_step)
    wrapped = (np.asarray(x) + 45.0) % 90.0 - 45.0
    return BellSettings(*map(float, wrapped)), float(s)


def optimum_curve(ps) -> list[tuple[float, float, float]]:
    """(p, dphi*, S*) for each p."""
    return [(float(p), *optimize_symmetric(p)) for p in ps]


def violation_threshold(tol: float = 1e-4) -> float:
    """Smallest p whose symmetric optimum exceeds the local bound 2 (bisection)."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if optimize_symmetric(mid)[1] > 2.0 + VIOLATION_MARGIN:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
