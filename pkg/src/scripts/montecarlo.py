from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

from src.scripts.modulation import Bs2State, Schedule, in_state_mask, validate
from src.utils.errors import (
    DuplicatePhase,
    EmptyPhaseGrid,
    InvalidArrivalModel,
    InvalidEventCount,
    UnknownPhase,
)

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ['time', 'phase', 'bs2_state', 'detector']
COUNT_COLUMNS = ['phase', 'n_x', 'n_y', 'n_x_in', 'n_y_in', 'n_x_out', 'n_y_out']
STATE_CATEGORIES = [Bs2State.IN.value, Bs2State.OUT.value]


class Detector(Enum):
    X = 'X'
    Y = 'Y'


DETECTOR_CATEGORIES = [Detector.X.value, Detector.Y.value]


@dataclass(frozen=True)
class ArrivalModel:
    """
    How particle arrival instants are spread over [0, T).

    kind 'uniform' spaces arrivals 1/rate apart, 'poisson' draws exponential gaps.
    A rate of None means n_events / T, i.e. one pass over the schedule.
    """

    kind: str = 'uniform'
    rate: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ('uniform', 'poisson'):
            raise InvalidArrivalModel(f"Unknown arrival model {self.kind!r}; use 'uniform' or 'poisson'")
        if self.rate is not None and not self.rate > 0:
            raise InvalidArrivalModel(f"Arrival rate must be positive, got {self.rate!r}")


@dataclass(frozen=True)
class EventRecord:
    time: float
    bs2_state: Bs2State
    phase: float
    detector: Detector


@dataclass(frozen=True, eq=False)
class CountTable:
    """Per-phase detection counts, split by detector and BS2 state."""

    frame: pd.DataFrame

    @property
    def phases(self) -> np.ndarray:
        return self.frame['phase'].to_numpy()

    @property
    def total(self) -> int:
        return int(self.frame['n_x'].sum() + self.frame['n_y'].sum())

    def merge(self, other: CountTable) -> CountTable:
        """Sum counts phase by phase; the result is ordered by phase."""

        combined = pd.concat([self.frame, other.frame], ignore_index=True)
        summed = combined.groupby('phase', sort=True, as_index=False).sum()
        return CountTable(summed[COUNT_COLUMNS].astype({c: 'int64' for c in COUNT_COLUMNS[1:]}))


# Detection model
def _port_x_probability(phi, is_in):
    # BS2 in: (1 - cos phi)/2; BS2 out: 1/2 whatever the phase.
    return np.where(is_in, (1.0 - np.cos(phi)) / 2.0, 0.5)


def detection_probs(phi: float, state: Bs2State) -> tuple[float, float]:
    """
    Normalized detector probabilities for one particle.

    Returns:
        tuple: (p_x, p_y), summing to exactly 1
    """
    if not math.isfinite(phi):
        raise ValueError(f"Phase must be finite, got {phi}")
    p_x = float(_port_x_probability(phi, state is Bs2State.IN))
    return p_x, 1.0 - p_x


def arrival_times(arrivals: ArrivalModel, n: int, total_time: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival instants folded into [0, T); the schedule repeats when the stream runs past T."""

    rate = arrivals.rate if arrivals.rate is not None else n / total_time
    if arrivals.kind == 'uniform':
        raw = np.arange(n) / rate
    else:
        raw = np.cumsum(rng.exponential(1.0 / rate, size=n))
    times = np.mod(raw, total_time)
    return np.minimum(times, np.nextafter(total_time, 0.0))


# Event generation
def events_to_df(records: Iterable[EventRecord]) -> pd.DataFrame:
    """Normalize EventRecord objects into the event-log DataFrame."""

    rows = [{
        'time': r.time,
        'phase': r.phase,
        'bs2_state': r.bs2_state.value,
        'detector': r.detector.value,
    } for r in records]
    return _typed_events(pd.DataFrame(rows, columns=EVENT_COLUMNS))


def df_to_events(events: pd.DataFrame) -> list[EventRecord]:
    return [EventRecord(float(t), Bs2State(s), float(p), Detector(d))
            for t, p, s, d in events[EVENT_COLUMNS].itertuples(index=False)]


def _typed_events(frame: pd.DataFrame) -> pd.DataFrame:
    frame = frame.astype({'time': float, 'phase': float})
    frame['bs2_state'] = pd.Categorical(frame['bs2_state'], categories=STATE_CATEGORIES)
    frame['detector'] = pd.Categorical(frame['detector'], categories=DETECTOR_CATEGORIES)
    return frame


def _simulate_phase(schedule: Schedule, phi: float, n: int, arrivals: ArrivalModel,
                    seed_seq: np.random.SeedSequence) -> pd.DataFrame:
    rng = np.random.default_rng(seed_seq)
    times = arrival_times(arrivals, n, schedule.total_time, rng)
    is_in = in_state_mask(schedule, times)
    hit_x = rng.random(n) < _port_x_probability(phi, is_in)

    frame = pd.DataFrame({
        'time': times,
        'phase': np.full(n, phi),
        'bs2_state': pd.Categorical.from_codes(np.where(is_in, 0, 1), categories=STATE_CATEGORIES),
        'detector': pd.Categorical.from_codes(np.where(hit_x, 0, 1), categories=DETECTOR_CATEGORIES),
    })
    return frame


def _check_phase_grid(phases) -> list[float]:
    grid = [float(phi) for phi in phases]
    if not grid:
        raise EmptyPhaseGrid("Phase grid is empty")
    if len(set(grid)) != len(grid):
        raise DuplicatePhase("Phase grid contains repeated values")
    if not all(math.isfinite(phi) for phi in grid):
        raise EmptyPhaseGrid("Phase grid contains non-finite values")
    return grid


def run(schedule: Schedule, phases, n_events_per_phase: int,
        arrivals: ArrivalModel = ArrivalModel(), seed: int = 0,
        workers: int = 1) -> tuple[pd.DataFrame, CountTable]:
    """
    Send particles one by one through the modulated interferometer.

    Each phase point owns the substream spawned at its index from the master
    seed, so the output does not depend on `workers`.

    Args:
        schedule (Schedule): BS2 control over [0, T)
        phases (list): phase grid in radians
        n_events_per_phase (int): detected particles per phase point
        arrivals (ArrivalModel): arrival-time model
        seed (int): master seed
        workers (int): phase points simulated concurrently

    Returns:
        tuple: (event log DataFrame, CountTable)
    """
    validate(schedule)
    grid = _check_phase_grid(phases)
    if isinstance(n_events_per_phase, bool) or int(n_events_per_phase) != n_events_per_phase or n_events_per_phase < 1:
        raise InvalidEventCount(f"Events per phase must be a positive integer, got {n_events_per_phase!r}")
    n = int(n_events_per_phase)

    substreams = np.random.SeedSequence(seed).spawn(len(grid))
    tasks = [(schedule, phi, n, arrivals, substreams[i]) for i, phi in enumerate(grid)]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            frames = list(executor.map(lambda task: _simulate_phase(*task), tasks))
    else:
        frames = [_simulate_phase(*task) for task in tasks]

    events = pd.concat(frames, ignore_index=True)
    table = accumulate(events, grid)
    logger.info("Simulated %d events over %d phase points (seed=%d, arrivals=%s)",
                len(events), len(grid), seed, arrivals.kind)
    return events, table


def accumulate(events: Union[pd.DataFrame, Iterable[EventRecord]], phases) -> CountTable:
    """
    Count events by (phase, detector, BS2 state).

    Args:
        events: event-log DataFrame or an iterable of EventRecord
        phases (list): the phase grid; every event phase must be on it

    Returns:
        CountTable: one row per grid phase, in grid order
    """
    grid = _check_phase_grid(phases)
    if not isinstance(events, pd.DataFrame):
        events = events_to_df(events)

    n_phases = len(grid)
    index = events['phase'].map({phi: i for i, phi in enumerate(grid)})
    if index.isna().any():
        unknown = events.loc[index.isna(), 'phase'].iloc[0]
        raise UnknownPhase(f"Event phase {unknown!r} is not on the phase grid")
    index = index.to_numpy(dtype=np.int64)

    is_x = (events['detector'] == Detector.X.value).to_numpy()
    is_in = (events['bs2_state'] == Bs2State.IN.value).to_numpy()

    def count(mask):
        return np.bincount(index[mask], minlength=n_phases).astype(np.int64)

    frame = pd.DataFrame({
        'phase': grid,
        'n_x_in': count(is_x & is_in),
        'n_y_in': count(~is_x & is_in),
        'n_x_out': count(is_x & ~is_in),
        'n_y_out': count(~is_x & ~is_in),
    })
    frame['n_x'] = frame['n_x_in'] + frame['n_x_out']
    frame['n_y'] = frame['n_y_in'] + frame['n_y_out']
    return CountTable(frame[COUNT_COLUMNS])


def time_resolved_counts(events: pd.DataFrame, total_time: float, bins: int = 50,
                         phase: Optional[float] = None) -> pd.DataFrame:
    """
    Bin detections by arrival time to expose the in/out alternation of the output.

    Args:
        events (pd.DataFrame): event log from `run`
        total_time (float): schedule length T
        bins (int): number of equal-width time bins
        phase (float): restrict to one phase point (all phases when None)

    Returns:
        pd.DataFrame: t_start, t_end, n_x, n_y, in_fraction per bin
    """
    if bins < 1:
        raise ValueError(f"Need at least one time bin, got {bins}")
    if phase is not None:
        events = events[events['phase'] == float(phase)]
    edges = np.linspace(0.0, total_time, bins + 1)
    times = events['time'].to_numpy()
    is_x = (events['detector'] == Detector.X.value).to_numpy()
    is_in = (events['bs2_state'] == Bs2State.IN.value).to_numpy()

    n_x, _ = np.histogram(times[is_x], bins=edges)
    n_y, _ = np.histogram(times[~is_x], bins=edges)
    n_in, _ = np.histogram(times[is_in], bins=edges)
    n_all = n_x + n_y
    with np.errstate(invalid='ignore', divide='ignore'):
        in_fraction = np.where(n_all > 0, n_in / np.maximum(n_all, 1), np.nan)

    return pd.DataFrame({
        't_start': edges[:-1],
        't_end': edges[1:],
        'n_x': n_x,
        'n_y': n_y,
        'in_fraction': in_fraction,
    })
