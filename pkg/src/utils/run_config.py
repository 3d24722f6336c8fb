from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from typing import Mapping, Optional

import numpy as np
from dotenv import dotenv_values

from src.utils.errors import ConfigError

MODES = ('fringe', 'modulate', 'compare', 'condition')
ENV_PREFIX = 'MZI_'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

DEFAULT_TOLERANCE = {'modulate': 0.02, 'compare': 1e-12}


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


def parse_angle(token: str) -> float:
    """
    Read a float or a multiple of pi: '1.5', 'pi', '-pi', '2pi', '2*pi', 'pi/2', '3pi/4'.
    """
    text = token.strip().lower().replace('π', 'pi')
    if 'pi' not in text:
        try:
            return float(text)
        except ValueError as e:
            raise ConfigError(f"Cannot read angle {token!r}") from e

    coef_text, _, rest = text.partition('pi')
    coef_text = coef_text.strip().rstrip('*').strip()
    try:
        if coef_text in ('', '+'):
            coef = 1.0
        elif coef_text == '-':
            coef = -1.0
        else:
            coef = float(coef_text)
        rest = rest.strip()
        divisor = float(rest[1:]) if rest.startswith('/') else 1.0
        if rest and not rest.startswith('/'):
            raise ValueError(rest)
    except ValueError as e:
        raise ConfigError(f"Cannot read angle {token!r}") from e
    if divisor == 0:
        raise ConfigError(f"Division by zero in angle {token!r}")
    return coef * math.pi / divisor


def parse_grid(spec: str) -> GridSpec:
    """Parse 'start:stop:count' (inclusive of both ends)."""

    parts = str(spec).split(':')
    if len(parts) != 3:
        raise ConfigError(f"Grid must look like start:stop:count, got {spec!r}")
    start, stop = parse_angle(parts[0]), parse_angle(parts[1])
    try:
        count = int(parts[2])
    except ValueError as e:
        raise ConfigError(f"Grid point count must be an integer, got {parts[2]!r}") from e
    if count < 2:
        raise ConfigError("phase grid needs ≥ 2 points")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigError(f"Grid ends must be finite, got {spec!r}")
    return GridSpec(start, stop, count)


def _to_int(value) -> int:
    number = float(value)
    if not number.is_integer():
        raise ValueError(value)
    return int(number)


def _to_optional_float(value) -> Optional[float]:
    return None if value in (None, '') else float(value)


def _to_optional_str(value) -> Optional[str]:
    return None if value in (None, '') else str(value)


@dataclass(frozen=True)
class RunConfig:
    mode: str = 'fringe'
    phases: GridSpec = GridSpec(0.0, 2 * math.pi, 21)
    thetas: GridSpec = GridSpec(0.0, math.pi / 2, 100)
    theta: Optional[float] = None
    schedule: Optional[str] = None
    duty: Optional[float] = None
    period: float = 1.0
    total: Optional[float] = None
    events: int = 100_000
    seed: int = 42
    arrivals: str = 'uniform'
    rate: Optional[float] = None
    out: str = '-'
    event_log: Optional[str] = None
    trace: Optional[str] = None
    trace_bins: int = 50
    tolerance: Optional[float] = None
    workers: int = 1
    bs2: str = 'in'
    transit_time: float = 0.0
    log_level: str = 'INFO'

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.arrivals not in ('uniform', 'poisson'):
            raise ConfigError(f"Unknown arrival model {self.arrivals!r}")
        if self.bs2 not in ('in', 'out'):
            raise ConfigError(f"bs2 must be 'in' or 'out', got {self.bs2!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")
        if self.events < 1:
            raise ConfigError(f"events must be at least 1, got {self.events}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.trace_bins < 1:
            raise ConfigError(f"trace_bins must be at least 1, got {self.trace_bins}")
        if self.log_level not in LOG_LEVELS:
            raise ConfigError(f"Unknown log level {self.log_level!r}")
        if self.transit_time < 0:
            raise ConfigError(f"transit_time must be non-negative, got {self.transit_time!r}")

    @property
    def effective_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return DEFAULT_TOLERANCE.get(self.mode, 0.02)

    def schedule_sources(self) -> list[str]:
        return [name for name in ('theta', 'duty', 'schedule') if getattr(self, name) is not None]


CONVERTERS = {
    'mode': str,
    'phases': parse_grid,
    'thetas': parse_grid,
    'theta': lambda v: None if v in (None, '') else parse_angle(str(v)),
    'schedule': _to_optional_str,
    'duty': _to_optional_float,
    'period': float,
    'total': _to_optional_float,
    'events': _to_int,
    'seed': _to_int,
    'arrivals': lambda v: str(v).lower(),
    'rate': _to_optional_float,
    'out': str,
    'event_log': _to_optional_str,
    'trace': _to_optional_str,
    'trace_bins': _to_int,
    'tolerance': _to_optional_float,
    'workers': _to_int,
    'bs2': lambda v: str(v).lower(),
    'transit_time': float,
    'log_level': lambda v: str(v).upper(),
}
KEYS = tuple(f.name for f in fields(RunConfig))


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace('-', '_')


def _from_environment(environ: Mapping[str, str]) -> dict:
    values = {}
    for key in KEYS:
        env_key = f'{ENV_PREFIX}{key.upper()}'
        if env_key in environ:
            values[key] = environ[env_key]
    return values


def _from_manifest(path) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    values = {}
    for key, value in dotenv_values(path).items():
        name = _normalize_key(key)
        if name.startswith(ENV_PREFIX.lower()):
            name = name[len(ENV_PREFIX):]
        if name not in KEYS:
            raise ConfigError(f"Unknown key {key!r} in config file {path}")
        values[name] = value
    return values


def load_run_config(flags: Optional[Mapping] = None, config_path=None,
                    environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """
    Build a RunConfig from defaults, MZI_* environment variables, an optional
    key=value manifest and command-line flags (later sources win).

    Args:
        flags (dict): flag values; None means "not given"
        config_path (str): manifest path, parsed with python-dotenv
        environ (dict): environment mapping, os.environ by default

    Returns:
        RunConfig: validated configuration
    """
    raw = _from_environment(os.environ if environ is None else environ)
    if config_path:
        raw.update(_from_manifest(config_path))
    for key, value in (flags or {}).items():
        name = _normalize_key(key)
        if value is not None and name in KEYS:
            raw[name] = value

    converted = {}
    for key, value in raw.items():
        try:
            converted[key] = CONVERTERS[key](value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Bad value for {key}: {value!r}") from e
    return RunConfig(**converted)
