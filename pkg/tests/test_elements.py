import math

import numpy as np
import pytest

from src.optics import ModeState, Unitary2, apply_element, compose, compose_all, is_unitary
from src.optics.interferometer import beam_splitter, phase_plate
from src.utils.errors import NonUnitaryElement


def test_beam_splitter_and_phase_plate_are_unitary():
    assert is_unitary(beam_splitter(), 1e-12)
    assert is_unitary(phase_plate(1.234), 1e-12)
    assert is_unitary(Unitary2.identity(), 1e-15)


def test_is_unitary_rejects_scaled_matrix():
    assert not is_unitary(Unitary2(2 + 0j, 0j, 0j, 1 + 0j), 1e-6)


def test_is_unitary_needs_positive_tolerance():
    with pytest.raises(ValueError):
        is_unitary(beam_splitter(), 0.0)


def test_apply_element_preserves_norm():
    state = ModeState(0.6 + 0.2j, -0.3 + 0.7j)
    chain = compose_all(beam_splitter(), phase_plate(0.7), beam_splitter())
    out = apply_element(chain, state)
    assert math.isclose(out.norm2, state.norm2, rel_tol=1e-12)


def test_apply_element_rejects_non_unitary():
    lossy = Unitary2(0.5 + 0j, 0j, 0j, 1 + 0j)
    with pytest.raises(NonUnitaryElement):
        apply_element(lossy, ModeState(1 + 0j, 0j))


def test_compose_applies_first_argument_first():
    u1, u2 = beam_splitter(), phase_plate(math.pi / 3)
    np.testing.assert_allclose(compose(u1, u2).matrix, u2.matrix @ u1.matrix, atol=1e-15)


def test_beam_splitter_twice_is_identity():
    np.testing.assert_allclose(compose(beam_splitter(), beam_splitter()).matrix, np.eye(2), atol=1e-15)


def test_mode_state_rejects_nan():
    with pytest.raises(ValueError):
        ModeState(complex(float('nan'), 0.0), 0j)


def test_from_matrix_checks_shape():
    with pytest.raises(ValueError):
        Unitary2.from_matrix(np.eye(3))
