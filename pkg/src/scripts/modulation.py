from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from src.utils.errors import (
    EmptySchedule,
    GapInCoverage,
    InvalidDuty,
    InvalidProbability,
    InvalidSegment,
    NonIntegerPeriodCount,
    OverlappingSegments,
    ScheduleFormatError,
    TimeOutOfRange,
)

logger = logging.getLogger(__name__)

PERIOD_COUNT_TOL = 1e-9


class Bs2State(Enum):
    IN = 'IN'
    OUT = 'OUT'


@dataclass(frozen=True)
class Segment:
    """BS2 holds `state` on the half-open interval [t_start, t_end)."""

    t_start: float
    t_end: float
    state: Bs2State

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Schedule:
    segments: tuple[Segment, ...]
    total_time: float

    @property
    def starts(self) -> np.ndarray:
        return np.array([seg.t_start for seg in self.segments], dtype=float)

    @property
    def in_mask(self) -> np.ndarray:
        return np.array([seg.state is Bs2State.IN for seg in self.segments], dtype=bool)


@dataclass(frozen=True)
class DutyFractions:
    """Time-averaged weights of the In (A) and Out (B) settings."""

    a_frac: float
    b_frac: float

    @property
    def theta(self) -> float:
        # A = sin^2(theta); derived, never stored.
        return math.asin(math.sqrt(self.a_frac))


# --- Validation and lookup ---
def validate(s: Schedule, transit_time: float = 0.0) -> Schedule:
    """
    Check that the segments tile [0, T) with exactly one BS2 state per instant.

    Args:
        s (Schedule): schedule to check
        transit_time (float): segments shorter than this are logged as warnings,
            since the particle transit through BS2 is no longer negligible.

    Returns:
        Schedule: `s` unchanged
    """
    if not s.segments or not s.total_time > 0:
        raise EmptySchedule(f"Schedule has no segments or non-positive total time (T={s.total_time!r})")

    previous_end = 0.0
    for i, seg in enumerate(s.segments):
        if not seg.t_start < seg.t_end:
            raise InvalidSegment(f"Segment {i} [{seg.t_start!r}, {seg.t_end!r}) is empty or reversed")
        if seg.t_start < previous_end:
            raise OverlappingSegments(f"Segment {i} starts at {seg.t_start!r}, before the previous end {previous_end!r}")
        if seg.t_start > previous_end:
            raise GapInCoverage(f"Gap in coverage between {previous_end!r} and segment {i} start {seg.t_start!r}")
        if transit_time > 0 and seg.duration < transit_time:
            logger.warning("Segment %d lasts %r, shorter than the transit time %r", i, seg.duration, transit_time)
        previous_end = seg.t_end

    if previous_end < s.total_time:
        raise GapInCoverage(f"Coverage ends at {previous_end!r}, before T={s.total_time!r}")
    if previous_end > s.total_time:
        raise OverlappingSegments(f"Last segment ends at {previous_end!r}, past T={s.total_time!r}")
    return s


def state_at(s: Schedule, t: float) -> Bs2State:
    """BS2 state at time t; a boundary instant belongs to the segment that starts there."""

    if not 0 <= t < s.total_time:
        raise TimeOutOfRange(f"t={t!r} outside [0, {s.total_time!r})")
    return s.segments[int(np.searchsorted(s.starts, t, side='right')) - 1].state


def in_state_mask(s: Schedule, times: np.ndarray) -> np.ndarray:
    """Vectorized state_at: True where BS2 is in at each of `times`."""

    times = np.asarray(times, dtype=float)
    if times.size and (times.min() < 0 or times.max() >= s.total_time):
        raise TimeOutOfRange(f"Times must lie in [0, {s.total_time!r})")
    index = np.searchsorted(s.starts, times, side='right') - 1
    return s.in_mask[index]


def duty_fractions(s: Schedule) -> DutyFractions:
    """A = (time BS2 is in) / T and B = 1 - A, exact for step-function control."""

    in_time = math.fsum(seg.duration for seg in s.segments if seg.state is Bs2State.IN)
    a_frac = min(max(in_time / s.total_time, 0.0), 1.0)
    return DutyFractions(a_frac=a_frac, b_frac=1.0 - a_frac)


# --- Builders ---
def _merge_runs(segments: list[Segment]) -> tuple[Segment, ...]:
    merged: list[Segment] = []
    for seg in segments:
        if merged and merged[-1].state is seg.state and merged[-1].t_end == seg.t_start:
            merged[-1] = Segment(merged[-1].t_start, seg.t_end, seg.state)
        else:
            merged.append(seg)
    return tuple(merged)


def _slot_count(slot: float, total: float, label: str) -> int:
    if not slot > 0 or not total > 0:
        raise NonIntegerPeriodCount(f"{label} and total time must be positive (got {slot!r}, {total!r})")
    ratio = total / slot
    count = round(ratio)
    if count < 1 or abs(ratio - count) > PERIOD_COUNT_TOL * max(count, 1):
        raise NonIntegerPeriodCount(f"Total time {total!r} is not a positive integer multiple of {label} {slot!r}")
    return count


def make_constant(state: Bs2State, total: float) -> Schedule:
    """BS2 permanently in (pure wave setup) or permanently out (which-path setup)."""

    if not total > 0:
        raise EmptySchedule(f"Total time must be positive, got {total!r}")
    return Schedule((Segment(0.0, float(total), state),), float(total))


def make_periodic(duty: float, period: float, total: float) -> Schedule:
    """
    Square-wave control: each period starts with BS2 in for duty*period, then out.

    Switch instants are placed at (k + duty) * period, so the In fraction of the
    result equals duty to a few ulp (exactly for a single unit-length period).

    Args:
        duty (float): In fraction of each period, in [0, 1]
        period (float): period length in seconds
        total (float): accumulation time T, a whole number of periods

    Returns:
        Schedule: validated schedule with adjacent equal-state segments merged
    """
    if not 0 <= duty <= 1:
        raise InvalidDuty(f"Duty must lie in [0, 1], got {duty!r}")
    n_periods = _slot_count(period, total, 'period')

    segments = []
    for k in range(n_periods):
        start = k * period
        end = float(total) if k == n_periods - 1 else (k + 1) * period
        if duty == 1:
            switch = end
        elif duty == 0:
            switch = start
        else:
            switch = min((k + duty) * period, end)
        if switch > start:
            segments.append(Segment(start, switch, Bs2State.IN))
        if switch < end:
            segments.append(Segment(switch, end, Bs2State.OUT))
    return validate(Schedule(_merge_runs(segments), float(total)))


def make_random_telegraph(p_in: float, dwell: float, total: float, seed: int) -> Schedule:
    """
    Random control: each dwell-length slot is independently In with probability p_in.

    Deterministic for a fixed seed.
    """
    if not 0 <= p_in <= 1:
        raise InvalidProbability(f"p_in must lie in [0, 1], got {p_in!r}")
    n_slots = _slot_count(dwell, total, 'dwell')
    rng = np.random.default_rng(seed)
    draws = rng.random(n_slots) < p_in

    segments = []
    for k, is_in in enumerate(draws):
        end = float(total) if k == n_slots - 1 else (k + 1) * dwell
        segments.append(Segment(k * dwell, end, Bs2State.IN if is_in else Bs2State.OUT))
    logger.debug("Random telegraph schedule: %d slots, %d in", n_slots, int(draws.sum()))
    return validate(Schedule(_merge_runs(segments), float(total)))


# --- Text format: header `T=<total>`, then `t_start t_end IN|OUT` per line ---
def format_schedule(s: Schedule) -> str:
    lines = [f'T={s.total_time!r}']
    lines += [f'{seg.t_start!r} {seg.t_end!r} {seg.state.value}' for seg in s.segments]
    return '\n'.join(lines) + '\n'


def parse_schedule(text: str) -> Schedule:
    """Parse the schedule text format and validate the result."""

    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line and not line.startswith('#')]
    if not lines:
        raise EmptySchedule("Schedule text is empty")
    if not lines[0].startswith('T='):
        raise ScheduleFormatError(f"First line must be 'T=<total>', got {lines[0]!r}")
    try:
        total = float(lines[0][2:])
    except ValueError as e:
        raise ScheduleFormatError(f"Bad total time in {lines[0]!r}") from e

    segments = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise ScheduleFormatError(f"Line {lineno}: expected 't_start t_end IN|OUT', got {line!r}")
        try:
            segments.append(Segment(float(parts[0]), float(parts[1]), Bs2State(parts[2].upper())))
        except ValueError as e:
            raise ScheduleFormatError(f"Line {lineno}: cannot parse {line!r}") from e
    return validate(Schedule(tuple(segments), total))


def dump_schedule(s: Schedule, path) -> None:
    Path(path).write_text(format_schedule(s))


def load_schedule(path) -> Schedule:
    path = Path(path)
    if not path.is_file():
        raise ScheduleFormatError(f"Schedule file not found: {path}")
    logger.info("Loading schedule from %s", path)
    return parse_schedule(path.read_text())
