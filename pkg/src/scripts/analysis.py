from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from src.scripts.modulation import Bs2State, DutyFractions
from src.scripts.montecarlo import CountTable
from src.utils.errors import (
    DegenerateFit,
    EmptySubset,
    EmptyTable,
    InsufficientPhaseCoverage,
    ThetaOutOfRange,
)

logger = logging.getLogger(__name__)

THETA_SLACK = 1e-12
MIN_PHASE_POINTS = 5
REPORT_COLUMNS = ['theta', 'phase', 'rate_pred', 'rate_obs', 'stderr']


@dataclass(frozen=True, eq=False)
class FringeScan:
    """Detection rate at one port versus phase, with binomial standard errors."""

    phases: np.ndarray
    rates_x: np.ndarray
    uncertainties: np.ndarray

    def __post_init__(self):
        n = len(self.phases)
        if len(self.rates_x) != n or len(self.uncertainties) != n:
            raise ValueError("phases, rates and uncertainties must have equal lengths")
        rates = np.asarray(self.rates_x, dtype=float)
        if rates.size and (rates.min() < -1e-12 or rates.max() > 1 + 1e-12):
            raise ValueError("Rates must lie in [0, 1]")


@dataclass(frozen=True)
class DualityMeasures:
    visibility: float
    distinguishability: float
    residual: float
    visibility_err: float = 0.0
    distinguishability_err: float = 0.0


def duality_measures(v: float, d: float, v_err: float = 0.0, d_err: float = 0.0) -> DualityMeasures:
    return DualityMeasures(visibility=v, distinguishability=d, residual=abs(v + d - 1.0),
                           visibility_err=v_err, distinguishability_err=d_err)


def check_theta(theta) -> None:
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < -THETA_SLACK) or np.any(theta > math.pi / 2 + THETA_SLACK):
        raise ThetaOutOfRange(f"theta must lie in [0, pi/2], got {theta}")


# --- Closed-form predictions ---
def predicted_modulated_intensity(theta, phi, p0: float = 0.5):
    """
    Time-averaged detector signal of the modulated interferometer.

    p_x = P0 (1 - sin^2(theta) cos(phi)), p_y = P0 (1 + sin^2(theta) cos(phi)).
    With the default P0 = 1/2 the two ports sum to 1. Accepts scalars or arrays.

    Returns:
        tuple: (p_x, p_y)
    """
    check_theta(theta)
    s2 = np.sin(theta) ** 2
    c = np.cos(phi)
    return p0 * (1.0 - s2 * c), p0 * (1.0 + s2 * c)


def half_angle_form_gap(theta, phi):
    """
    Absolute gap between the cos^2(phi/2) form of the modulated signal and the
    detector-y prediction P0 (1 + sin^2(theta) cos(phi)).

    The half-angle form 2 P0 [cos^2(phi/2) sin^2(theta) + cos^2(theta)/2]
    expands to the y port, not the x port. P0 = 1/2.
    """
    check_theta(theta)
    p0 = 0.5
    half_angle_form = 2 * p0 * (np.cos(np.asarray(phi) / 2) ** 2 * np.sin(theta) ** 2 + 0.5 * np.cos(theta) ** 2)
    _, p_y = predicted_modulated_intensity(theta, phi, p0)
    return np.abs(half_angle_form - p_y)


def predicted_scan(theta: float, phases) -> FringeScan:
    """Noise-free detector-x scan for a given theta."""

    phases = np.asarray(phases, dtype=float)
    p_x, _ = predicted_modulated_intensity(theta, phases)
    return FringeScan(phases, np.asarray(p_x, dtype=float), np.zeros_like(phases))


# --- Estimators ---
def _check_coverage(phases: np.ndarray) -> None:
    n = len(phases)
    if n < MIN_PHASE_POINTS:
        raise InsufficientPhaseCoverage(f"Need at least {MIN_PHASE_POINTS} phase points, got {n}")
    span = float(np.max(phases) - np.min(phases))
    # Inclusive and endpoint-free grids both count as one full period.
    if span * n / (n - 1) < 2 * math.pi * (1 - 1e-9):
        raise InsufficientPhaseCoverage(f"Phase grid spans {span:.6g} rad, less than one period")


def estimate_visibility(scan: FringeScan) -> tuple[float, float]:
    """
    Fringe visibility from a least-squares fit rate(phi) = c0 + c1 cos(phi).

    v = |c1| / c0, clipped to [0, 1]. The error is propagated from the fit
    covariance: the per-point binomial variances when the scan carries them,
    otherwise the residual scatter.

    Args:
        scan (FringeScan): at least 5 points covering a full period

    Returns:
        tuple: (v, v_err)
    """
    phases = np.asarray(scan.phases, dtype=float)
    rates = np.asarray(scan.rates_x, dtype=float)
    sigmas = np.asarray(scan.uncertainties, dtype=float)
    _check_coverage(phases)

    if np.ptp(rates) == 0:
        level = rates[0]
        v_err = float(np.sqrt(np.mean(sigmas ** 2)) / level) if level > 0 else 0.0
        return 0.0, v_err

    design = np.column_stack([np.ones_like(phases), np.cos(phases)])
    coef, _, rank, _ = np.linalg.lstsq(design, rates, rcond=None)
    if rank < 2:
        raise DegenerateFit("Phase grid does not resolve the cos(phi) term")
    c0, c1 = coef
    if not c0 > 0:
        raise DegenerateFit(f"Fitted mean rate {c0!r} is not positive")

    xtx_inv = np.linalg.inv(design.T @ design)
    if np.any(sigmas > 0):
        cov = xtx_inv @ design.T @ np.diag(sigmas ** 2) @ design @ xtx_inv
    else:
        residuals = rates - design @ coef
        dof = max(len(rates) - 2, 1)
        cov = xtx_inv * float(residuals @ residuals) / dof

    v = abs(c1) / c0
    grad = np.array([-abs(c1) / c0 ** 2, np.sign(c1) / c0])
    v_err = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    return float(min(max(v, 0.0), 1.0)), v_err


def raw_visibility(scan: FringeScan) -> float:
    """(max - min) / (max + min) over the scan points."""

    rates = np.asarray(scan.rates_x, dtype=float)
    high, low = float(rates.max()), float(rates.min())
    return (high - low) / (high + low) if high + low > 0 else 0.0


def scan_from_counts(table: CountTable, port: str = 'x', subset: Optional[Bs2State] = None) -> FringeScan:
    """
    Turn a CountTable into the empirical detection-rate scan at one port.

    Args:
        table (CountTable): counts per phase
        port (str): 'x' or 'y'
        subset (Bs2State): keep only events recorded in this BS2 state (all when None)

    Returns:
        FringeScan: rates and binomial standard errors; phases with no events are dropped
    """
    if port not in ('x', 'y'):
        raise ValueError(f"port must be 'x' or 'y', got {port!r}")
    frame = table.frame
    suffix = '' if subset is None else f'_{subset.value.lower()}'
    n_port = frame[f'n_{port}{suffix}'].to_numpy(dtype=float)
    n_all = (frame[f'n_x{suffix}'] + frame[f'n_y{suffix}']).to_numpy(dtype=float)

    keep = n_all > 0
    if not keep.any():
        label = 'all' if subset is None else subset.value
        raise EmptySubset(f"No events in subset {label}")
    if not keep.all():
        logger.warning("Dropping %d phase points with no events", int((~keep).sum()))

    rates = n_port[keep] / n_all[keep]
    stderr = np.sqrt(rates * (1 - rates) / n_all[keep])
    return FringeScan(frame['phase'].to_numpy(dtype=float)[keep], rates, stderr)


def estimate_distinguishability(table: CountTable, fractions: DutyFractions) -> tuple[float, float]:
    """
    Which-path distinguishability as the fraction of events recorded with BS2 out.

    Each such event has its path fixed by the detector that fired; events with
    BS2 in carry no path information. Expected value: B = cos^2(theta).

    Returns:
        tuple: (d, d_err) with the binomial standard error
    """
    total = table.total
    if total == 0:
        raise EmptyTable("Count table has no events")
    n_out = int(table.frame['n_x_out'].sum() + table.frame['n_y_out'].sum())
    d = n_out / total
    d_err = math.sqrt(d * (1 - d) / total)
    if d_err > 0 and abs(d - fractions.b_frac) > 5 * d_err:
        logger.warning("Out-fraction %.6f is more than 5 sigma from the duty expectation B=%.6f",
                       d, fractions.b_frac)
    return d, d_err


def complementarity_check(m: DualityMeasures) -> float:
    """|V + D - 1|; zero when the visibility and distinguishability are complementary."""

    return abs(m.visibility + m.distinguishability - 1.0)


# --- Bundled measures and reports ---
def model_duality(theta: float, phases) -> DualityMeasures:
    """Noise-free measures: visibility fitted on the exact scan, D = cos^2(theta)."""

    v, v_err = estimate_visibility(predicted_scan(theta, phases))
    return duality_measures(v, math.cos(theta) ** 2, v_err=v_err)


def measure_duality(table: CountTable, fractions: DutyFractions) -> DualityMeasures:
    v, v_err = estimate_visibility(scan_from_counts(table))
    d, d_err = estimate_distinguishability(table, fractions)
    return duality_measures(v, d, v_err=v_err, d_err=d_err)


def analysis_report(table: CountTable, theta: float) -> pd.DataFrame:
    """Predicted against observed detector-x rate per phase."""

    scan = scan_from_counts(table)
    rate_pred, _ = predicted_modulated_intensity(theta, scan.phases)
    return pd.DataFrame({
        'theta': np.full(len(scan.phases), float(theta)),
        'phase': scan.phases,
        'rate_pred': rate_pred,
        'rate_obs': scan.rates_x,
        'stderr': scan.uncertainties,
    }, columns=REPORT_COLUMNS)


def format_summary(m: DualityMeasures) -> str:
    return f'V={m.visibility!r} D={m.distinguishability!r} residual={m.residual!r}'
