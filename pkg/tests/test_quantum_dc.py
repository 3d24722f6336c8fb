import math

import numpy as np
import pytest

from src.scripts.analysis import predicted_modulated_intensity
from src.scripts.modulation import Bs2State, duty_fractions, make_periodic
from src.scripts.montecarlo import df_to_events, run
from src.scripts.quantum_dc import (
    COMPARISON_COLUMNS,
    AncillaState,
    MixtureModel,
    ancilla_evolve,
    ancilla_marginal,
    compare_models,
    event_level_discriminator,
    mixture_intensity,
    subset_table,
)
from src.utils.errors import EmptySubset, InvalidMixture, NotNormalized

GRID = np.linspace(0.0, 2 * np.pi, 21)


def test_three_models_agree_on_dense_grid():
    frame = compare_models(np.linspace(0, math.pi / 2, 100), np.linspace(0, 2 * math.pi, 100))
    assert list(frame.columns) == COMPARISON_COLUMNS
    assert len(frame) == 10_000
    assert frame['max_abs_diff'].max() <= 1e-12


def test_corner_grid_agrees_exactly():
    frame = compare_models([0.0, math.pi / 2], [0.0, math.pi])
    assert frame['max_abs_diff'].max() <= 1e-15
    assert frame['p_modulated'].tolist() == pytest.approx([0.5, 0.5, 0.0, 1.0], abs=1e-15)


def test_mixture_weights_must_be_normalized():
    with pytest.raises(InvalidMixture):
        MixtureModel(0.7, 0.7)
    with pytest.raises(InvalidMixture):
        MixtureModel(-0.1, 1.1)


def test_mixture_matches_modulated_prediction():
    theta = 0.8
    m = MixtureModel.from_theta(theta)
    for phi in (0.0, 1.0, 2.5):
        expected = predicted_modulated_intensity(theta, phi)
        assert mixture_intensity(m, phi) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize('theta', [0.0, 0.3, math.pi / 4, math.pi / 2])
def test_ancilla_state_is_normalized(theta):
    state = ancilla_evolve(theta, 1.7)
    assert state.norm2 == pytest.approx(1.0, abs=1e-12)
    p_x, p_y = ancilla_marginal(state)
    assert p_x + p_y == pytest.approx(1.0, abs=1e-12)


def test_ancilla_marginal_rejects_unnormalized_state():
    with pytest.raises(NotNormalized):
        ancilla_marginal(AncillaState(np.array([[1.0, 0.0], [1.0, 0.0]], dtype=complex)))


def test_discriminator_separates_in_and_out(half_duty_run):
    events, _ = half_duty_run
    report = event_level_discriminator(events)
    assert report.consistent_with_modulation
    assert report.v_in >= 0.99
    assert report.v_out <= 0.02
    assert report.d_out == 1.0
    assert report.n_in == report.n_out == 21 * 10_000
    assert report.empty_subsets == []


def test_discriminator_reports_empty_out_subset():
    events, _ = run(make_periodic(1.0, 1.0, 1.0), GRID, 1_000, seed=4)
    report = event_level_discriminator(events)
    assert report.empty_subsets == ['Out']
    assert report.note == 'Out subset empty'
    assert report.v_out is None and not report.consistent_with_modulation
    with pytest.raises(EmptySubset):
        event_level_discriminator(events, strict=True)


def test_subset_table_keeps_one_state(half_duty_run):
    _, table = half_duty_run
    out_only = subset_table(table, Bs2State.OUT)
    assert (out_only.frame['n_x_in'] == 0).all()
    assert out_only.total == 21 * 10_000


def test_discriminator_accepts_event_records():
    events, _ = run(make_periodic(0.5, 1.0, 1.0), GRID, 2_000, seed=5)
    from_frame = event_level_discriminator(events)
    from_records = event_level_discriminator(df_to_events(events))
    assert from_records == from_frame


def test_mixture_from_duty_fractions():
    fractions = duty_fractions(make_periodic(0.3, 1.0, 1.0))
    mixture = MixtureModel.from_fractions(fractions)
    assert mixture.a_weight == pytest.approx(0.3, abs=1e-15)
    assert mixture.a_weight + mixture.b_weight == 1.0
    theta = math.asin(math.sqrt(0.3))
    for phi in GRID:
        p_x, p_y = mixture_intensity(mixture, phi)
        assert p_x == pytest.approx(predicted_modulated_intensity(theta, phi)[0], abs=1e-12)
        assert p_x + p_y == pytest.approx(1.0, abs=1e-12)
