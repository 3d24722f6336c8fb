from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.optics.elements import ModeState, Unitary2, apply_element, compose_all
from src.utils.errors import PipelineMismatch

logger = logging.getLogger(__name__)

CLOSED_FORM_TOL = 1e-12


@dataclass(frozen=True)
class PipelineConfig:
    """One stationary MZI setting: BS2 in or out, phase on path Y, source amplitude."""

    bs2_present: bool
    phase: float
    source_amplitude: complex = 1 + 0j

    def __post_init__(self):
        if not math.isfinite(self.phase):
            raise ValueError(f"Phase must be finite, got {self.phase}")
        if not abs(self.source_amplitude) > 0:
            raise ValueError("Source amplitude must be non-zero")


@dataclass(frozen=True)
class OutputAmplitudes:
    at_x: complex
    at_y: complex


@dataclass(frozen=True)
class PortIntensities:
    p_x: float
    p_y: float
    p0: float


# Devices
def beam_splitter() -> Unitary2:
    """50:50 beam splitter, real Hadamard convention (1/sqrt2)[[1, 1], [1, -1]]."""

    c = 1 / math.sqrt(2)
    return Unitary2(c + 0j, c + 0j, c + 0j, -c + 0j)


def phase_plate(phi: float) -> Unitary2:
    """Phase plate on path Y: diag(1, e^{i phi})."""

    if not math.isfinite(phi):
        raise ValueError(f"Phase must be finite, got {phi}")
    return Unitary2(1 + 0j, 0j, 0j, complex(np.exp(1j * phi)))


def mirrors() -> Unitary2:
    # Equal phase on both arms, absorbed into the global phase.
    return Unitary2.identity()


def pipeline_elements(cfg: PipelineConfig) -> list[Unitary2]:
    """Devices in the order the particle meets them."""

    elements = [beam_splitter(), mirrors(), phase_plate(cfg.phase)]
    if cfg.bs2_present:
        elements.append(beam_splitter())
    return elements


# Amplitudes and intensities
def closed_form_amplitudes(cfg: PipelineConfig) -> OutputAmplitudes:
    """
    Closed-form exit amplitudes.

    BS2 in:  at_x = psi0 (1 - e^{i phi}) / 2,  at_y = psi0 (1 + e^{i phi}) / 2
    BS2 out: at_x = psi0 e^{i phi} / sqrt2,    at_y = psi0 / sqrt2
    """
    psi0 = cfg.source_amplitude
    e = complex(np.exp(1j * cfg.phase))
    if cfg.bs2_present:
        return OutputAmplitudes(psi0 * (1 - e) / 2, psi0 * (1 + e) / 2)
    return OutputAmplitudes(psi0 * e / math.sqrt(2), psi0 / math.sqrt(2))


def propagate(cfg: PipelineConfig) -> OutputAmplitudes:
    """
    Run the source state (psi0, 0) through the composed device chain.

    Detector x sits on the second mode (the minus port of BS2, or path Y when
    BS2 is out) and detector y on the first. The result is checked entrywise
    against closed_form_amplitudes.

    Args:
        cfg (PipelineConfig): the stationary setting

    Returns:
        OutputAmplitudes: amplitudes at detector x and detector y
    """
    chain = compose_all(*pipeline_elements(cfg))
    out = apply_element(chain, ModeState(cfg.source_amplitude, 0j))
    result = OutputAmplitudes(at_x=out.amp_y, at_y=out.amp_x)

    expected = closed_form_amplitudes(cfg)
    tol = CLOSED_FORM_TOL * abs(cfg.source_amplitude)
    if abs(result.at_x - expected.at_x) > tol or abs(result.at_y - expected.at_y) > tol:
        raise PipelineMismatch(f"Composed pipeline {result} differs from closed form {expected} for {cfg}")
    return result


def intensities(out: OutputAmplitudes) -> PortIntensities:
    p_x = abs(out.at_x) ** 2
    p_y = abs(out.at_y) ** 2
    return PortIntensities(p_x=p_x, p_y=p_y, p0=(p_x + p_y) / 2)


def fringe_to_df(phases, bs2_present: bool, source_amplitude: complex = 1 + 0j) -> pd.DataFrame:
    """Tabulate detector intensities over a phase grid for one stationary setting."""

    rows = []
    for phi in phases:
        port = intensities(propagate(PipelineConfig(bs2_present, float(phi), source_amplitude)))
        rows.append({'phase': float(phi), 'p_x': port.p_x, 'p_y': port.p_y})
    logger.debug("Tabulated %d phase points with BS2 %s", len(rows), "in" if bs2_present else "out")
    return pd.DataFrame(rows, columns=['phase', 'p_x', 'p_y'])
