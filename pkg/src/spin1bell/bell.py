"""
Spin-1 correlation, the CHSH combination, its local-hidden-variable bound,
and the comparison model of two distinguishable spin-1/2 pairs.

Outcomes are mapped to the values +1 -> +1, 0 -> -1, -1 -> +1 before
correlating.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .analyzer import joint_probabilities
from .qstate import OUTCOMES, JointState, make_pair_product_state

OUTCOME_VALUES = {1: 1, 0: -1, -1: 1}
VALUES = np.array([OUTCOME_VALUES[o] for o in OUTCOMES], dtype=float)

GRID_SUM_TOL = 1e-8

# Setting labels used throughout count tables and reports.
SETTING_LABELS = ("ab", "ab'", "a'b", "a'b'")
SIGNS = {"ab": 1.0, "ab'": -1.0, "a'b": 1.0, "a'b'": 1.0}


@dataclass(frozen=True)
class BellSettings:
    """Analyzer angles in degrees."""

    alpha: float
    alpha_prime: float
    beta: float
    beta_prime: float

    def __post_init__(self):
        if not all(np.isfinite(self.as_tuple())):
            raise ValueError(f"angles must be finite, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.alpha_prime, self.beta, self.beta_prime)

    def pairs(self) -> dict[str, tuple[float, float]]:
        """The four (Alice, Bob) angle pairs keyed by setting label."""
        return {
            "ab": (self.alpha, self.beta),
            "ab'": (self.alpha, self.beta_prime),
            "a'b": (self.alpha_prime, self.beta),
            "a'b'": (self.alpha_prime, self.beta_prime),
        }

    def shifted(self, delta: float) -> "BellSettings":
        return BellSettings(*(x + delta for x in self.as_tuple()))


def expectation(grid) -> float:
    """Signed sum of the nine joint probabilities, sum_AB v(A) v(B) p[A, B]."""
    grid = np.asarray(grid, dtype=float)
    if grid.shape != (3, 3):
        raise ValueError(f"outcome grid must be 3x3, got {grid.shape}")
    total = grid.sum()
    if abs(total - 1.0) > GRID_SUM_TOL:
        raise ValueError(f"outcome grid is not normalized (sum = {total!r})")
    return float(VALUES @ grid @ VALUES)


def correlation(state: JointState, alpha: float, beta: float) -> float:
    return expectation(joint_probabilities(state, alpha, beta))


def combine(correlations: dict[str, float]) -> float:
    """Signed CHSH combination E(a,b) - E(a,b') + E(a',b) + E(a',b')."""
    return float(sum(SIGNS[label] * correlations[label] for label in SETTING_LABELS))


def chsh_signed(state: JointState, settings: BellSettings) -> float:
    return combine({label: correlation(state, a, b) for label, (a, b) in settings.pairs().items()})


def chsh(state: JointState, settings: BellSettings) -> float:
    """S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|."""
    return abs(chsh_signed(state, settings))


def lhv_strategy_values() -> dict[tuple[int, int, int, int], int]:
    """Signed CHSH value of every deterministic strategy.

    Keys are the outcomes assigned to (a, a', b, b'); each outcome is
    mapped through the value table before combining, in integers.
    """
    values = {}
    for strategy in itertools.product(OUTCOMES, repeat=4):
        va, vap, vb, vbp = (OUTCOME_VALUES[o] for o in strategy)
        values[strategy] = va * vb - va * vbp + vap * vb + vap * vbp
    return values


def lhv_max() -> int:
    """Largest |S| over all 3^4 deterministic local strategies."""
    return max(abs(v) for v in lhv_strategy_values().values())


def _pair_outcome_probabilities(theta: float) -> np.ndarray:
    """Polarization singlet statistics: P[alice photon, bob photon] with H=0, V=1."""
    t = np.radians(theta)
    same = 0.5 * np.sin(t) ** 2
    diff = 0.5 * np.cos(t) ** 2
    return np.array([[same, diff], [diff, same]])


# photon-count pattern (number of H among two photons) -> spin-1 outcome
_H_COUNT_TO_INDEX = {2: OUTCOMES.index(1), 1: OUTCOMES.index(0), 0: OUTCOMES.index(-1)}


def pairs_model_probabilities(alpha: float, beta: float) -> np.ndarray:
    """Outcome grid when the four photons form two independent polarization singlets.

    Each side reports +1 for (H, H), 0 for one H and one V, and -1 for
    (V, V) in its rotated basis. The two pairs are independent, so the
    joint distribution factorizes over pairs.
    """
    pair = _pair_outcome_probabilities(alpha - beta)
    grid = np.zeros((3, 3))
    for a1, b1, a2, b2 in itertools.product((0, 1), repeat=4):
        weight = pair[a1, b1] * pair[a2, b2]
        ia = _H_COUNT_TO_INDEX[(a1 == 0) + (a2 == 0)]
        ib = _H_COUNT_TO_INDEX[(b1 == 0) + (b2 == 0)]
        grid[ia, ib] += weight
    return grid


def _photon_basis(angle: float) -> np.ndarray:
    """Rows are |H_a> and |V_a> in the {|H>, |V>} basis."""
    a = np.radians(angle)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, s], [-s, c]])


def pairs_model_probabilities_statevector(alpha: float, beta: float) -> np.ndarray:
    """Same distribution as :func:`pairs_model_probabilities`, from the 16-dim four-photon state."""
    psi = make_pair_product_state()
    ua, ub = _photon_basis(alpha), _photon_basis(beta)
    amp = np.einsum("ip,jq,kr,ls,pqrs->ijkl", ua, ua, ub, ub, psi)
    probs = np.abs(amp) ** 2
    grid = np.zeros((3, 3))
    for a1, a2, b1, b2 in itertools.product((0, 1), repeat=4):
        ia = _H_COUNT_TO_INDEX[(a1 == 0) + (a2 == 0)]
        ib = _H_COUNT_TO_INDEX[(b1 == 0) + (b2 == 0)]
        grid[ia, ib] += probs[a1, a2, b1, b2]
    return grid


def pairs_model_chsh(settings: BellSettings) -> float:
    return abs(
        combine(
            {
                label: expectation(pairs_model_probabilities(a, b))
                for label, (a, b) in settings.pairs().items()
            }
        )
    )


def spin_half_baseline(theta: float) -> float:
    """Polarization-singlet correlation -cos(2 theta), theta in degrees."""
    return float(-np.cos(2.0 * np.radians(theta)))
