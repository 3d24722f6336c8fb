import math

import numpy as np
import pytest

from src.scripts.modulation import (
    Bs2State,
    Schedule,
    Segment,
    duty_fractions,
    dump_schedule,
    format_schedule,
    in_state_mask,
    load_schedule,
    make_constant,
    make_periodic,
    make_random_telegraph,
    parse_schedule,
    state_at,
    validate,
)
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

IN, OUT = Bs2State.IN, Bs2State.OUT


def test_validate_accepts_tiling():
    s = Schedule((Segment(0.0, 0.3, IN), Segment(0.3, 1.0, OUT)), 1.0)
    assert validate(s) is s


def test_validate_rejects_gap():
    s = Schedule((Segment(0.0, 0.3, IN), Segment(0.4, 1.0, OUT)), 1.0)
    with pytest.raises(GapInCoverage):
        validate(s)


def test_validate_rejects_overlap():
    s = Schedule((Segment(0.0, 0.5, IN), Segment(0.4, 1.0, OUT)), 1.0)
    with pytest.raises(OverlappingSegments):
        validate(s)


def test_validate_rejects_short_coverage():
    with pytest.raises(GapInCoverage):
        validate(Schedule((Segment(0.0, 0.8, IN),), 1.0))


def test_validate_rejects_empty_segment_and_schedule():
    with pytest.raises(InvalidSegment):
        validate(Schedule((Segment(0.0, 0.0, IN), Segment(0.0, 1.0, OUT)), 1.0))
    with pytest.raises(EmptySchedule):
        validate(Schedule((), 1.0))


def test_short_segment_warns_about_transit_time(caplog):
    s = Schedule((Segment(0.0, 1e-6, IN), Segment(1e-6, 1.0, OUT)), 1.0)
    validate(s, transit_time=1e-3)
    assert 'transit time' in caplog.text


def test_state_at_boundary_belongs_to_next_segment():
    s = make_periodic(0.3, 1.0, 1.0)
    assert state_at(s, 0.0) is IN
    assert state_at(s, 0.2999) is IN
    assert state_at(s, 0.3) is OUT
    with pytest.raises(TimeOutOfRange):
        state_at(s, 1.0)
    with pytest.raises(TimeOutOfRange):
        state_at(s, -0.1)


def test_in_state_mask_matches_state_at():
    s = make_periodic(0.25, 0.5, 2.0)
    times = np.linspace(0.0, 1.999, 97)
    expected = [state_at(s, t) is IN for t in times]
    assert in_state_mask(s, times).tolist() == expected


def test_duty_fractions_of_periodic_schedule():
    fractions = duty_fractions(make_periodic(0.3, 1.0, 1.0))
    assert fractions.a_frac == pytest.approx(0.3, abs=1e-15)
    assert fractions.a_frac + fractions.b_frac == 1.0
    assert math.sin(fractions.theta) ** 2 == pytest.approx(0.3, abs=1e-12)


def test_periodic_schedule_over_many_periods():
    s = make_periodic(0.5, 0.1, 1.0)
    assert len(s.segments) == 20
    assert duty_fractions(s).a_frac == pytest.approx(0.5, abs=1e-12)


def test_duty_limits_give_single_segment():
    assert make_periodic(1.0, 1.0, 3.0).segments == (Segment(0.0, 3.0, IN),)
    assert make_periodic(0.0, 1.0, 3.0).segments == (Segment(0.0, 3.0, OUT),)


def test_periodic_rejects_bad_input():
    with pytest.raises(InvalidDuty):
        make_periodic(1.5, 1.0, 1.0)
    with pytest.raises(NonIntegerPeriodCount):
        make_periodic(0.5, 0.3, 1.0)


def test_make_constant():
    s = make_constant(OUT, 2.0)
    assert duty_fractions(s).b_frac == 1.0


def test_random_telegraph_is_reproducible():
    a = make_random_telegraph(0.4, 0.01, 1.0, seed=7)
    b = make_random_telegraph(0.4, 0.01, 1.0, seed=7)
    assert a == b
    assert 0.2 < duty_fractions(a).a_frac < 0.6
    with pytest.raises(InvalidProbability):
        make_random_telegraph(1.2, 0.01, 1.0, seed=7)


def test_schedule_text_format(tmp_path):
    s = make_periodic(0.3, 0.5, 1.0)
    assert parse_schedule(format_schedule(s)) == s

    path = tmp_path / 'schedule.txt'
    dump_schedule(s, path)
    assert load_schedule(path) == s


def test_parse_schedule_reports_line_number():
    with pytest.raises(ScheduleFormatError, match='Line 3'):
        parse_schedule("T=1.0\n0.0 0.5 IN\n0.5 1.0 SIDEWAYS\n")


def test_parse_schedule_skips_comments():
    s = parse_schedule("# half and half\nT=1.0\n0.0 0.5 in\n0.5 1.0 out\n")
    assert duty_fractions(s).a_frac == 0.5


def test_parse_schedule_names_offending_gap():
    with pytest.raises(GapInCoverage, match='0.6'):
        parse_schedule("T=1.0\n0.0 0.5 IN\n0.6 1.0 OUT\n")


def test_load_schedule_missing_file(tmp_path):
    with pytest.raises(ScheduleFormatError):
        load_schedule(tmp_path / 'nope.txt')


@pytest.mark.parametrize('duty, period, total', [
    (0.3, 0.1, 1.0),
    (0.1, 0.3, 3.0),
    (0.25, 0.2, 2.0),
    (0.7, 1.5, 4.5),
])
def test_periodic_in_fraction_matches_duty(duty, period, total):
    s = make_periodic(duty, period, total)
    assert duty_fractions(s).a_frac == pytest.approx(duty, abs=1e-12)
    switches = [seg.t_end for seg in s.segments if seg.state is IN]
    assert switches == [(k + duty) * period for k in range(len(switches))]


@pytest.mark.parametrize('duty', [0.1, 0.3, 0.5, 0.7, 0.9])
def test_single_unit_period_in_fraction_is_exact(duty):
    assert duty_fractions(make_periodic(duty, 1.0, 1.0)).a_frac == duty


def test_fractions_sum_to_one_over_random_schedules():
    rng = np.random.default_rng(2024)
    for seed in range(100):
        n_slots = int(rng.integers(1, 51))
        total = float(rng.uniform(0.5, 5.0))
        s = make_random_telegraph(float(rng.random()), total / n_slots, total, seed=seed)
        fractions = duty_fractions(s)
        assert 0.0 <= fractions.a_frac <= 1.0
        assert abs(fractions.a_frac + fractions.b_frac - 1.0) <= 1e-15


@pytest.mark.parametrize('schedule', [
    make_periodic(0.3, 0.1, 1.0),
    make_periodic(0.7, 0.25, 2.0),
    make_random_telegraph(0.4, 0.01, 1.0, seed=7),
    Schedule((Segment(0.0, 0.13, IN), Segment(0.13, 0.5, OUT), Segment(0.5, 0.91, IN),
              Segment(0.91, 1.7, OUT)), 1.7),
])
def test_duty_fractions_match_midpoint_quadrature(schedule):
    samples = 10_000
    times = (np.arange(samples) + 0.5) * schedule.total_time / samples
    in_share = float(np.mean(in_state_mask(schedule, times)))
    assert duty_fractions(schedule).a_frac == pytest.approx(in_share, abs=len(schedule.segments) / samples)
