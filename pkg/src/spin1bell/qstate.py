"""
Two-photon polarization modes viewed as spin-1 particles.

Each side (Alice, Bob) carries a two-photon mode living in the symmetric
subspace spanned by |2H>, |HV>, |2V>, labelled as the spin-1 outcomes
+1, 0, -1. Joint states live on the 9-dim product space with the basis
ordered (A, B) = (+1,+1), (+1,0), (+1,-1), (0,+1), ..., (-1,-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OUTCOMES = (1, 0, -1)

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
EIGEN_TOL = 1e-10


class InvalidStateError(ValueError):
    """Raised when a state violates one of its invariants."""


def outcome_index(outcome: int) -> int:
    """Position of a spin-1 outcome (+1, 0, -1) in the triplet basis."""
    try:
        return OUTCOMES.index(int(outcome))
    except ValueError:
        raise ValueError(f"outcome must be one of +1, 0, -1, got {outcome!r}") from None


def joint_index(a: int, b: int) -> int:
    return 3 * outcome_index(a) + outcome_index(b)


def canonical_phase(amplitudes: np.ndarray) -> np.ndarray:
    """Fix the global phase so the (+1,-1) amplitude is real and nonnegative.

    Falls back to the first nonzero amplitude when (+1,-1) vanishes.
    """
    amps = np.asarray(amplitudes, dtype=complex)
    k = joint_index(1, -1)
    if abs(amps[k]) < 1e-15:
        nonzero = np.flatnonzero(np.abs(amps) > 1e-15)
        if nonzero.size == 0:
            return amps.copy()
        k = nonzero[0]
    ref = amps[k]
    out = amps * (abs(ref) / ref)
    out[k] = abs(ref)
    return out


@dataclass(frozen=True, eq=False)
class JointState:
    """Pure or mixed state on the Alice x Bob triplet space.

    Attributes:
        kind: ``"pure"`` or ``"mixed"``.
        data: 9 amplitudes for a pure state, 9x9 density matrix otherwise.
    """

    kind: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.kind not in ("pure", "mixed"):
            raise InvalidStateError(f"unknown state kind {self.kind!r}")
        expected = (9,) if self.kind == "pure" else (9, 9)
        if arr.shape != expected:
            raise InvalidStateError(
                f"{self.kind} state needs shape {expected}, got {arr.shape}"
            )

    @classmethod
    def pure(cls, amplitudes) -> "JointState":
        return cls("pure", canonical_phase(np.ravel(amplitudes)))

    @classmethod
    def mixed(cls, rho) -> "JointState":
        return cls("mixed", np.asarray(rho))

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def amplitude(self, a: int, b: int) -> complex:
        if not self.is_pure:
            raise InvalidStateError("amplitudes are only defined for pure states")
        return complex(self.data[joint_index(a, b)])

    def density(self) -> np.ndarray:
        """Density matrix (9x9), built on the fly for pure states."""
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def purity(self) -> float:
        rho = self.density()
        return float(np.real(np.trace(rho @ rho)))

    def validate(self) -> "JointState":
        """Check the state invariants, raising InvalidStateError on the first failure."""
        if not np.all(np.isfinite(self.data)):
            raise InvalidStateError("state contains non-finite entries")
        if self.is_pure:
            norm = float(np.linalg.norm(self.data))
            if abs(norm - 1.0) > NORM_TOL:
                raise InvalidStateError(f"normalization violated: |psi| = {norm!r}")
            return self
        rho = self.data
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > HERMITIAN_TOL:
            raise InvalidStateError(f"Hermiticity violated: max |rho - rho^H| = {herm:.3e}")
        tr = np.trace(rho)
        if abs(tr - 1.0) > NORM_TOL:
            raise InvalidStateError(f"trace violated: tr(rho) = {tr!r}")
        lowest = float(np.min(np.linalg.eigvalsh(rho)))
        if lowest < -EIGEN_TOL:
            raise InvalidStateError(f"positivity violated: smallest eigenvalue {lowest:.3e}")
        return self


def make_spin1_singlet() -> JointState:
    """(|+1,-1> - |0,0> + |-1,+1>)/sqrt(3), i.e. (|2H,2V> - |HV,VH> + |2V,2H>)/sqrt(3)."""
    amps = np.zeros(9, dtype=complex)
    amps[joint_index(1, -1)] = 1.0
    amps[joint_index(0, 0)] = -1.0
    amps[joint_index(-1, 1)] = 1.0
    return JointState.pure(amps / np.sqrt(3.0))


def make_noisy_state(p: float) -> JointState:
    """Singlet with weight ``p`` mixed with its three product terms, each weight (1-p)/3.

    Args:
        p: probability of the pure entangled component, in [0, 1].
    """
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    rho = p * make_spin1_singlet().density()
    for a, b in ((1, -1), (0, 0), (-1, 1)):
        k = joint_index(a, b)
        rho[k, k] += (1.0 - p) / 3.0
    return JointState.mixed(rho)


def maximally_mixed_state() -> JointState:
    return JointState.mixed(np.eye(9, dtype=complex) / 9.0)


# Single-photon polarization basis for the four-photon picture.
H, V = 0, 1


def make_pair_product_state() -> np.ndarray:
    """Two independent polarization singlets (|HV> - |VH>)/sqrt(2).

    Pair 1 is (Alice photon 1, Bob photon 1), pair 2 is (Alice photon 2,
    Bob photon 2). Returned as a (2, 2, 2, 2) tensor indexed
    ``[a1, a2, b1, b2]`` with H=0, V=1.
    """
    singlet = np.zeros((2, 2), dtype=complex)  # [alice photon, bob photon]
    singlet[H, V] = 1.0 / np.sqrt(2.0)
    singlet[V, H] = -1.0 / np.sqrt(2.0)
    return np.einsum("ac,bd->abcd", singlet, singlet)


def symmetric_embedding() -> np.ndarray:
    """Isometry (4 x 3) from the triplet basis into two-photon polarization space.

    Columns are |2H> = |HH>, |HV> = (|HV> + |VH>)/sqrt(2), |2V> = |VV>.
    """
    s = 1.0 / np.sqrt(2.0)
    return np.array(
        [
            [1.0, 0.0, 0.0],  # HH
            [0.0, s, 0.0],  # HV
            [0.0, s, 0.0],  # VH
            [0.0, 0.0, 1.0],  # VV
        ]
    )


def project_symmetric(four_photon: np.ndarray) -> tuple[JointState, float]:
    """Post-select both sides onto their symmetric two-photon subspace.

    Returns the renormalized triplet-space state and the projection weight.
    """
    psi = np.asarray(four_photon, dtype=complex).reshape(4, 4)  # [alice pair, bob pair]
    emb = symmetric_embedding()
    coeffs = emb.T @ psi @ emb
    weight = float(np.real(np.vdot(coeffs, coeffs)))
    if weight <= 0.0:
        raise InvalidStateError("state has no weight in the symmetric subspace")
    return JointState.pure(coeffs.reshape(9) / np.sqrt(weight)), weight
