from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from src.utils.errors import NonUnitaryElement

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class ModeState:
    """Complex amplitudes on the two interferometer modes (path or port x, y)."""

    amp_x: complex
    amp_y: complex

    def __post_init__(self):
        if not (np.isfinite(self.amp_x) and np.isfinite(self.amp_y)):
            raise ValueError(f"Non-finite amplitude in ModeState({self.amp_x}, {self.amp_y})")

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> ModeState:
        return cls(complex(vector[0]), complex(vector[1]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_x, self.amp_y], dtype=np.complex128)

    @property
    def norm2(self) -> float:
        return abs(self.amp_x) ** 2 + abs(self.amp_y) ** 2


@dataclass(frozen=True)
class Unitary2:
    """A 2x2 complex matrix standing for one lossless device (or a chain of them)."""

    u00: complex
    u01: complex
    u10: complex
    u11: complex

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> Unitary2:
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape != (2, 2):
            raise ValueError(f"Expected a 2x2 matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("Non-finite entry in 2x2 element")
        return cls(complex(matrix[0, 0]), complex(matrix[0, 1]),
                   complex(matrix[1, 0]), complex(matrix[1, 1]))

    @classmethod
    def identity(cls) -> Unitary2:
        return cls(1 + 0j, 0j, 0j, 1 + 0j)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.u00, self.u01],
                         [self.u10, self.u11]], dtype=np.complex128)


def is_unitary(u: Unitary2, tol: float) -> bool:
    """
    Check U^dagger U = I entrywise.

    Args:
        u (Unitary2): element to check
        tol (float): maximum allowed entrywise deviation, must be positive

    Returns:
        bool: True iff max |U^dagger U - I| <= tol
    """
    if not tol > 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    m = u.matrix
    deviation = np.max(np.abs(m.conj().T @ m - np.eye(2)))
    return bool(deviation <= tol)


def _require_unitary(u: Unitary2, label: str) -> None:
    if not is_unitary(u, UNITARY_TOL):
        raise NonUnitaryElement(f"{label} is not unitary at tolerance {UNITARY_TOL}: {u.matrix.tolist()}")


def apply_element(u: Unitary2, s: ModeState) -> ModeState:
    """Send a two-mode state through one element (matrix-vector product)."""

    _require_unitary(u, "element")
    out = ModeState.from_vector(u.matrix @ s.vector)
    logger.debug("apply_element: norm2 %r -> %r", s.norm2, out.norm2)
    return out


def compose(u1: Unitary2, u2: Unitary2) -> Unitary2:
    """
    Chain two elements, u1 first.

    Returns:
        Unitary2: the product u2 . u1
    """
    _require_unitary(u1, "first element")
    _require_unitary(u2, "second element")
    return Unitary2.from_matrix(u2.matrix @ u1.matrix)


def compose_all(*elements: Unitary2) -> Unitary2:
    """Chain any number of elements in the order a particle meets them."""

    total = Unitary2.identity()
    for element in elements:
        total = compose(total, element)
    return total
