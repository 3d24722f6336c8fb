# 1. Imports - organized by stage
import functools
import logging
import sys

import click
import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.optics import fringe_to_df
from src.scripts.analysis import (
    analysis_report,
    estimate_distinguishability,
    estimate_visibility,
    format_summary,
    half_angle_form_gap,
    measure_duality,
    scan_from_counts,
)
from src.scripts.modulation import Bs2State, duty_fractions, load_schedule, make_periodic, validate
from src.scripts.montecarlo import ArrivalModel, run, time_resolved_counts
from src.scripts.quantum_dc import (
    MixtureModel,
    compare_models,
    event_level_discriminator,
    mixture_intensity,
    subset_table,
)
from src.utils.csv_io import STDOUT, companion_path, write_csv
from src.utils.errors import AnalysisError, ConfigError, MziError, ScheduleError
from src.utils.run_config import MODES, RunConfig, load_run_config

logger = logging.getLogger(__name__)

# 2. Setup - exit-code contract and shared helpers
EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3

CONDITION_COLUMNS = ['subset', 'visibility', 'visibility_err', 'distinguishability', 'events']


def _fail(message: str, code: int) -> int:
    logger.error(message)
    click.echo(f"Error: {message}", err=True)
    return code


def guard_io(command):
    """Report unreadable or unwritable paths as usage errors (exit 2)."""

    @functools.wraps(command)
    def wrapper(config: RunConfig) -> int:
        try:
            return command(config)
        except OSError as e:
            return _fail(f"Cannot access {e.filename or 'file'}: {e.strerror or e}", EXIT_USAGE)
    return wrapper


# 3. SCHEDULE and SIMULATE - shared by the stochastic modes
def build_schedule(config: RunConfig):
    """Schedule from exactly one of --schedule, --duty or --theta (duty = sin^2 theta)."""

    sources = config.schedule_sources()
    if not sources and config.mode == 'condition':
        sources, duty = ['duty'], 0.5
    else:
        duty = config.duty
    if len(sources) != 1:
        raise ConfigError("Give exactly one of --schedule, --duty or --theta"
                          + (f" (got {', '.join(sources)})" if sources else ""))

    if config.schedule is not None:
        return validate(load_schedule(config.schedule), config.transit_time)
    if config.theta is not None:
        if not 0 <= config.theta <= np.pi / 2 + 1e-12:
            raise ConfigError(f"theta must lie in [0, pi/2], got {config.theta!r}")
        duty = min(float(np.sin(config.theta) ** 2), 1.0)
    total = config.total if config.total is not None else config.period
    return validate(make_periodic(duty, config.period, total), config.transit_time)


def _simulate(config: RunConfig, schedule):
    arrivals = ArrivalModel(config.arrivals, config.rate)
    return run(schedule, config.phases.values(), config.events, arrivals,
               seed=config.seed, workers=config.workers)


def mixture_rate_gap(table, mixture: MixtureModel) -> float:
    """Largest distance between the observed detector-x rate and the mixture average A P_in + B P_out."""

    frame = table.frame
    observed = frame['n_x'] / (frame['n_x'] + frame['n_y'])
    expected = np.array([mixture_intensity(mixture, phi)[0] for phi in frame['phase']])
    return float(np.max(np.abs(observed.to_numpy(dtype=float) - expected)))


# 4. Modes - one function per --mode, each returning an exit code
@guard_io
def cmd_fringe(config: RunConfig) -> int:
    """Analytic detector intensities versus phase, BS2 in or out."""

    print_stage('FRINGE')
    frame = fringe_to_df(config.phases.values(), bs2_present=config.bs2 == 'in')
    write_csv(frame, config.out)
    logger.info("✅ Fringe phase complete.")
    return EXIT_OK


@guard_io
def cmd_modulate(config: RunConfig) -> int:
    """
    Monte Carlo run of the time-modulated interferometer.

    Writes the CountTable, the per-phase analysis report and the V/D summary.
    Exit 1 when |V + D - 1| exceeds the tolerance.
    """
    try:
        print_stage('SCHEDULE')
        schedule = build_schedule(config)
        fractions = duty_fractions(schedule)
        logger.info("Duty fractions A=%.6f B=%.6f (theta=%.6f)", fractions.a_frac, fractions.b_frac, fractions.theta)

        print_stage('SIMULATE')
        events, table = _simulate(config, schedule)
        logger.info("✅ Simulate phase complete.")

        print_stage('ANALYZE')
        measures = measure_duality(table, fractions)
        report = analysis_report(table, fractions.theta)
        mixture_gap = mixture_rate_gap(table, MixtureModel.from_fractions(fractions))
        logger.info("Largest |rate_obs - mixture p_x| over the grid: %.6f", mixture_gap)
    except (ConfigError, ScheduleError) as e:
        return _fail(str(e), EXIT_USAGE)
    except AnalysisError as e:
        return _fail(str(e), EXIT_DEGENERATE)
    except MziError as e:
        return _fail(str(e), EXIT_USAGE)

    summary = format_summary(measures)
    write_csv(table.frame, config.out)
    if config.out != STDOUT:
        write_csv(report, companion_path(config.out, '.report.csv'), summary_line=summary)
    if config.event_log:
        write_csv(events, config.event_log)
    if config.trace:
        write_csv(time_resolved_counts(events, schedule.total_time, config.trace_bins), config.trace)
    click.echo(summary, err=True)

    if measures.residual > config.effective_tolerance:
        logger.warning("Complementarity residual %.6g exceeds tolerance %.6g",
                       measures.residual, config.effective_tolerance)
        return EXIT_ACCEPTANCE
    logger.info("✅ Analyze phase complete.")
    return EXIT_OK


@guard_io
def cmd_compare(config: RunConfig) -> int:
    """Modulated, mixture and ancilla predictions side by side over a (theta, phi) grid."""

    thetas = config.thetas.values()
    if thetas.min() < 0 or thetas.max() > np.pi / 2 + 1e-12:
        return _fail("theta grid must lie in [0, pi/2]", EXIT_USAGE)

    print_stage('COMPARE')
    frame = compare_models(thetas, config.phases.values())
    max_diff = float(frame['max_abs_diff'].max())
    theta_mesh, phi_mesh = np.meshgrid(thetas, config.phases.values(), indexing='ij')
    half_angle_gap = float(np.max(half_angle_form_gap(theta_mesh, phi_mesh)))
    write_csv(frame, config.out)
    click.echo(f"max_abs_diff={max_diff!r} half_angle_gap={half_angle_gap!r} "
               f"(the cos^2(phi/2) form equals the detector-y port)", err=True)

    tolerance = config.effective_tolerance
    if max_diff > tolerance or half_angle_gap > tolerance:
        logger.warning("Models disagree by %.3g (tolerance %.3g)", max(max_diff, half_angle_gap), tolerance)
        return EXIT_ACCEPTANCE
    logger.info("✅ Compare phase complete.")
    return EXIT_OK


def _row(subset, v, v_err, d, n):
    return {'subset': subset, 'visibility': v, 'visibility_err': v_err,
            'distinguishability': d, 'events': n}


@guard_io
def cmd_condition(config: RunConfig) -> int:
    """
    Visibility of the In-tagged and Out-tagged events of a modulated run.

    Exit 0 when V(In) >= 0.99 and V(Out) <= 0.02, exit 3 when a subset is empty.
    """
    try:
        print_stage('SCHEDULE')
        schedule = build_schedule(config)
        fractions = duty_fractions(schedule)

        print_stage('SIMULATE')
        events, table = _simulate(config, schedule)

        print_stage('CONDITION')
        report = event_level_discriminator(events)
        v_all, v_all_err = estimate_visibility(scan_from_counts(table))
        d_all, _ = estimate_distinguishability(table, fractions)
        d_in = estimate_distinguishability(subset_table(table, Bs2State.IN), fractions)[0] if report.n_in else None
    except (ConfigError, ScheduleError) as e:
        return _fail(str(e), EXIT_USAGE)
    except AnalysisError as e:
        return _fail(str(e), EXIT_DEGENERATE)
    except MziError as e:
        return _fail(str(e), EXIT_USAGE)

    frame = pd.DataFrame([
        _row('all', v_all, v_all_err, d_all, table.total),
        _row('in', report.v_in, report.v_in_err, d_in, report.n_in),
        _row('out', report.v_out, report.v_out_err, report.d_out, report.n_out),
    ], columns=CONDITION_COLUMNS)
    write_csv(frame, config.out)

    if report.empty_subsets:
        click.echo(f"Note: {report.note}", err=True)
        return EXIT_DEGENERATE
    click.echo(f"V(In)={report.v_in!r} V(Out)={report.v_out!r} D(Out)={report.d_out!r}", err=True)
    if not report.consistent_with_modulation:
        logger.warning("Conditioned visibilities do not show the In/Out split")
        return EXIT_ACCEPTANCE
    logger.info("✅ Condition phase complete.")
    return EXIT_OK


# 5. Entry point - configuration, logging and dispatch
COMMANDS = {
    'fringe': cmd_fringe,
    'modulate': cmd_modulate,
    'compare': cmd_compare,
    'condition': cmd_condition,
}


def print_stage(name: str) -> None:
    logger.info("--- Starting %s Phase ---", name)


def setup_logging(level: str) -> None:
    logging.basicConfig(stream=sys.stderr, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger('src').setLevel(level)


@click.command()
@click.option('--config', 'config_path', default=None, help='Flat key=value run manifest.')
@click.option('--mode', type=click.Choice(MODES), default=None)
@click.option('--phases', default=None, help='Phase grid start:stop:count, e.g. 0:2pi:21.')
@click.option('--thetas', default=None, help='Theta grid for compare mode.')
@click.option('--theta', default=None, help='Weight angle; the duty cycle is sin^2(theta).')
@click.option('--schedule', default=None, help='Schedule file.')
@click.option('--duty', type=float, default=None)
@click.option('--period', type=float, default=None)
@click.option('--total', type=float, default=None, help='Accumulation time T (default: one period).')
@click.option('--events', default=None, help='Detected particles per phase point.')
@click.option('--seed', type=int, default=None)
@click.option('--arrivals', type=click.Choice(['uniform', 'poisson']), default=None)
@click.option('--rate', type=float, default=None)
@click.option('--out', default=None, help="Output CSV path, '-' for stdout.")
@click.option('--event-log', default=None)
@click.option('--trace', default=None, help='Time-resolved counts CSV.')
@click.option('--trace-bins', type=int, default=None)
@click.option('--tolerance', type=float, default=None)
@click.option('--workers', type=int, default=None)
@click.option('--bs2', type=click.Choice(['in', 'out']), default=None)
@click.option('--transit-time', type=float, default=None)
@click.option('--log-level', default=None)
def main(config_path, **flags):
    """Single-particle Mach-Zehnder delayed-choice simulator."""

    load_dotenv()
    try:
        config = load_run_config(flags, config_path)
    except MziError as e:
        raise click.UsageError(str(e))

    setup_logging(config.log_level)
    logger.info("MZI Pipeline Initialized (mode=%s)...", config.mode)
    code = COMMANDS[config.mode](config)
    sys.exit(code)


if __name__ == '__main__':
    main()
