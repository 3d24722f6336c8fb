from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

from src.optics import OutputAmplitudes, PipelineConfig, intensities, propagate
from src.scripts.analysis import (
    check_theta,
    estimate_distinguishability,
    estimate_visibility,
    predicted_modulated_intensity,
    scan_from_counts,
)
from src.scripts.modulation import Bs2State, DutyFractions
from src.scripts.montecarlo import CountTable, EventRecord, accumulate, events_to_df
from src.utils.errors import EmptySubset, InvalidMixture, NotNormalized

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
NORM_TOL = 1e-12
COMPARISON_COLUMNS = ['theta', 'phi', 'p_modulated', 'p_mixture', 'p_ancilla', 'max_abs_diff']


@dataclass(frozen=True)
class MixtureModel:
    """Time-averaged weights of the BS2-in (A) and BS2-out (B) signals."""

    a_weight: float
    b_weight: float

    def __post_init__(self):
        if not (0 <= self.a_weight <= 1 and 0 <= self.b_weight <= 1):
            raise InvalidMixture(f"Weights must lie in [0, 1], got A={self.a_weight!r}, B={self.b_weight!r}")
        if abs(self.a_weight + self.b_weight - 1) > WEIGHT_TOL:
            raise InvalidMixture(f"Weights must sum to 1, got A+B={self.a_weight + self.b_weight!r}")

    @classmethod
    def from_fractions(cls, fractions: DutyFractions) -> MixtureModel:
        return cls(fractions.a_frac, fractions.b_frac)

    @classmethod
    def from_theta(cls, theta: float) -> MixtureModel:
        check_theta(theta)
        return cls(math.sin(theta) ** 2, math.cos(theta) ** 2)


@dataclass(frozen=True, eq=False)
class AncillaState:
    """Amplitudes indexed [port (x, y), ancilla (0, 1)]."""

    amplitudes: np.ndarray

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass
class DiscriminatorReport:
    v_in: Optional[float]
    v_in_err: Optional[float]
    v_out: Optional[float]
    v_out_err: Optional[float]
    v_all: Optional[float]
    d_out: Optional[float]
    n_in: int
    n_out: int
    consistent_with_modulation: bool
    empty_subsets: list[str] = field(default_factory=list)
    note: str = ''


# Stationary outputs, source amplitude 1
@lru_cache(maxsize=4096)
def _stationary_outputs(phi: float) -> tuple[OutputAmplitudes, OutputAmplitudes]:
    wave = propagate(PipelineConfig(bs2_present=True, phase=phi))
    particle = propagate(PipelineConfig(bs2_present=False, phase=phi))
    return wave, particle


def mixture_intensity(m: MixtureModel, phi: float, p0: float = 0.5) -> tuple[float, float]:
    """
    Averaged signal A P_in + B P_out at both detectors.

    P_in and P_out are the stationary BS2-in and BS2-out intensities from the
    interferometer pipeline; with P0 = 1/2 the ports sum to 1.
    """
    wave, particle = _stationary_outputs(float(phi))
    p_in, p_out = intensities(wave), intensities(particle)
    scale = 2 * p0
    p_x = scale * (m.a_weight * p_in.p_x + m.b_weight * p_out.p_x)
    p_y = scale * (m.a_weight * p_in.p_y + m.b_weight * p_out.p_y)
    return p_x, p_y


def ancilla_evolve(theta: float, phi: float) -> AncillaState:
    """
    Stationary superposition realized with a control qubit.

    cos(theta) tags the BS2-out (particle) output with ancilla 0 and sin(theta)
    tags the BS2-in (wave) output with ancilla 1, i.e. BS2 acts only on the
    ancilla-1 branch.

    Args:
        theta (float): weight angle in [0, pi/2], sin^2(theta) = A
        phi (float): phase on path Y

    Returns:
        AncillaState: normalized 2x2 amplitude array
    """
    check_theta(theta)
    wave, particle = _stationary_outputs(float(phi))
    amplitudes = np.array([
        [math.cos(theta) * particle.at_x, math.sin(theta) * wave.at_x],
        [math.cos(theta) * particle.at_y, math.sin(theta) * wave.at_y],
    ], dtype=np.complex128)
    state = AncillaState(amplitudes)
    if abs(state.norm2 - 1) > NORM_TOL:
        raise NotNormalized(f"Ancilla state norm^2 {state.norm2!r} for theta={theta!r}, phi={phi!r}")
    return state


def ancilla_marginal(s: AncillaState) -> tuple[float, float]:
    """Detector probabilities with the ancilla traced out."""

    if abs(s.norm2 - 1) > NORM_TOL:
        raise NotNormalized(f"Ancilla state has norm^2 {s.norm2!r}")
    probs = np.sum(np.abs(s.amplitudes) ** 2, axis=1)
    return float(probs[0]), float(probs[1])


def compare_models(thetas, phases) -> pd.DataFrame:
    """
    Detector-x probability under the time-modulated prediction, the mixture
    average and the ancilla marginal, over a (theta, phi) grid.
    """
    rows = []
    for theta in thetas:
        theta = float(theta)
        mixture = MixtureModel.from_theta(theta)
        for phi in phases:
            phi = float(phi)
            p_modulated = float(predicted_modulated_intensity(theta, phi)[0])
            p_mixture = mixture_intensity(mixture, phi)[0]
            p_ancilla = ancilla_marginal(ancilla_evolve(theta, phi))[0]
            values = (p_modulated, p_mixture, p_ancilla)
            rows.append({
                'theta': theta,
                'phi': phi,
                'p_modulated': p_modulated,
                'p_mixture': p_mixture,
                'p_ancilla': p_ancilla,
                'max_abs_diff': max(values) - min(values),
            })
    logger.debug("Compared three models on %d grid points", len(rows))
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)


def _subset_visibility(table: CountTable, subset: Optional[Bs2State]):
    try:
        return estimate_visibility(scan_from_counts(table, subset=subset))
    except EmptySubset:
        return None, None


def subset_table(table: CountTable, state: Bs2State) -> CountTable:
    """Keep only the counts recorded in one BS2 state; the other state's columns are zeroed."""

    frame = table.frame
    keep, drop = ('in', 'out') if state is Bs2State.IN else ('out', 'in')
    only = frame.assign(**{f'n_x_{drop}': 0, f'n_y_{drop}': 0},
                        n_x=frame[f'n_x_{keep}'], n_y=frame[f'n_y_{keep}'])
    return CountTable(only)


def event_level_discriminator(modulated_events: Union[pd.DataFrame, Iterable[EventRecord]],
                              strict: bool = False, v_in_min: float = 0.99, v_out_max: float = 0.02) -> DiscriminatorReport:
    """
    Split a tagged event record by BS2 state and measure each part's visibility.

    A time-modulated record shows V(In) near 1 and V(Out) near 0, a split that
    only exists when every event carries its schedule tag.

    Args:
        modulated_events: event log from montecarlo.run, or an iterable of EventRecord
        strict (bool): raise EmptySubset instead of reporting an empty partition
        v_in_min (float): lowest V(In) still counted as a full fringe
        v_out_max (float): highest V(Out) still counted as a flat line

    Returns:
        DiscriminatorReport: conditional visibilities and the verdict
    """
    if not isinstance(modulated_events, pd.DataFrame):
        modulated_events = events_to_df(modulated_events)
    phases = np.unique(modulated_events['phase'].to_numpy(dtype=float))
    table = accumulate(modulated_events, phases)
    frame = table.frame
    n_in = int(frame['n_x_in'].sum() + frame['n_y_in'].sum())
    n_out = int(frame['n_x_out'].sum() + frame['n_y_out'].sum())

    empty = [label for label, n in (('In', n_in), ('Out', n_out)) if n == 0]
    if empty and strict:
        raise EmptySubset(f"{' and '.join(empty)} subset empty")

    v_in, v_in_err = _subset_visibility(table, Bs2State.IN)
    v_out, v_out_err = _subset_visibility(table, Bs2State.OUT)
    v_all, _ = _subset_visibility(table, None)

    d_out = None
    if n_out:
        d_out, _ = estimate_distinguishability(subset_table(table, Bs2State.OUT), DutyFractions(0.0, 1.0))

    consistent = (v_in is not None and v_out is not None
                  and v_in >= v_in_min and v_out <= v_out_max)
    note = '; '.join(f'{label} subset empty' for label in empty)
    logger.info("Conditioned visibilities: V(In)=%s V(Out)=%s", v_in, v_out)
    return DiscriminatorReport(v_in, v_in_err, v_out, v_out_err, v_all, d_out,
                               n_in, n_out, consistent, empty, note)
