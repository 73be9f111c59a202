"""Rotated two-photon analyzers and the detection-efficiency forward model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import OUTCOMES, InvalidStateError, JointState

CLAMP_TOL = 1e-12

DEFAULT_ETA_A = 0.431
DEFAULT_ETA_B = 0.434


def normalize_angle(angle: float) -> float:
    """Map an angle in degrees onto [-90, 90)."""
    return float((angle + 90.0) % 180.0 - 90.0)


def outcome_vectors(angle: float) -> np.ndarray:
    """Rotated outcome states |2H_a>, |H_a V_a>, |2V_a> in the {|2H>, |HV>, |2V>} basis.

    Uses |H_a> = cos a |H> + sin a |V> and |V_a> = -sin a |H> + cos a |V>
    (counter-clockwise positive). Row k is the vector for outcome
    ``OUTCOMES[k]``; the matrix is real orthogonal.

    Args:
        angle: analyzer rotation in degrees.
    """
    a = np.radians(np.asarray(angle, dtype=float))
    c, s = np.cos(a), np.sin(a)
    r2 = np.sqrt(2.0)
    cs = r2 * s * c
    rows = [
        [c * c, cs, s * s],
        [-cs, c * c - s * s, cs],
        [s * s, -cs, c * c],
    ]
    return np.moveaxis(np.array(rows, dtype=float), (0, 1), (-2, -1))


def triplet_rotation(angle: float) -> np.ndarray:
    """Operator on the triplet space induced by rotating both photons of a mode by ``angle``."""
    return outcome_vectors(angle).T


@dataclass(frozen=True)
class DetectionModel:
    """Relative two-photon detection efficiency of the +1/-1 outcomes.

    Outcome 0 (|HV>) is the reference with efficiency exactly 1.
    """

    eta_a: float = DEFAULT_ETA_A
    eta_b: float = DEFAULT_ETA_B

    def __post_init__(self):
        for name in ("eta_a", "eta_b"):
            eta = getattr(self, name)
            if not (np.isfinite(eta) and 0.0 < eta <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {eta!r}")

    def factors(self) -> np.ndarray:
        """3x3 grid of eta_A^[A != 0] * eta_B^[B != 0]."""
        side_a = np.array([self.eta_a if o != 0 else 1.0 for o in OUTCOMES])
        side_b = np.array([self.eta_b if o != 0 else 1.0 for o in OUTCOMES])
        return np.outer(side_a, side_b)


def _check_grid(grid: np.ndarray) -> np.ndarray:
    lowest = grid.min()
    if lowest < -CLAMP_TOL:
        raise InvalidStateError(f"negative probability {lowest:.3e} in outcome grid")
    return np.clip(grid, 0.0, None)


def joint_probabilities(state: JointState, alpha: float, beta: float) -> np.ndarray:
    """Joint outcome distribution p[A, B] for analyzer angles ``alpha`` (Alice) and ``beta`` (Bob).

    Rows and columns follow the outcome order (+1, 0, -1).
    """
    state.validate()
    ua = outcome_vectors(alpha)
    ub = outcome_vectors(beta)
    if state.is_pure:
        amp = ua @ state.data.reshape(3, 3) @ ub.T
        grid = np.abs(amp) ** 2
    else:
        rho = state.data.reshape(3, 3, 3, 3)
        grid = np.real(np.einsum("ai,bj,ijkl,ak,bl->ab", ua, ub, rho, ua, ub, optimize=True))
    return _check_grid(grid)


def expected_counts(grid: np.ndarray, det: DetectionModel, corrected_total: float) -> np.ndarray:
    """Forward model for raw coincidence counts per interval.

    ``raw[A, B] = corrected_total * p[A, B] * eta_A^[A != 0] * eta_B^[B != 0]``
    """
    total = float(corrected_total)
    if not np.isfinite(total):
        raise ValueError(f"corrected_total must be finite, got {corrected_total!r}")
    if total <= 0.0:
        raise ValueError(f"corrected_total must be positive, got {corrected_total!r}")
    return total * np.asarray(grid, dtype=float) * det.factors()
