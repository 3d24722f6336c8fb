class MziError(Exception):
    """Base class for every error raised by the simulator."""


# --- Optics ---
class OpticsError(MziError):
    pass


class NonUnitaryElement(OpticsError, ValueError):
    """A 2x2 element failed the U^dagger U = I check."""


class PipelineMismatch(OpticsError):
    """Composed-matrix amplitudes disagree with the closed-form amplitudes."""


# --- Modulation schedules ---
class ScheduleError(MziError, ValueError):
    pass


class EmptySchedule(ScheduleError):
    pass


class InvalidSegment(ScheduleError):
    pass


class OverlappingSegments(ScheduleError):
    pass


class GapInCoverage(ScheduleError):
    pass


class TimeOutOfRange(ScheduleError):
    pass


class InvalidDuty(ScheduleError):
    pass


class NonIntegerPeriodCount(ScheduleError):
    pass


class InvalidProbability(ScheduleError):
    pass


class ScheduleFormatError(ScheduleError):
    pass


# --- Monte Carlo ---
class MonteCarloError(MziError, ValueError):
    pass


class EmptyPhaseGrid(MonteCarloError):
    pass


class DuplicatePhase(MonteCarloError):
    pass


class InvalidEventCount(MonteCarloError):
    pass


class InvalidArrivalModel(MonteCarloError):
    pass


class UnknownPhase(MonteCarloError):
    pass


# --- Analysis and model comparison ---
class AnalysisError(MziError, ValueError):
    pass


class ThetaOutOfRange(AnalysisError):
    pass


class InsufficientPhaseCoverage(AnalysisError):
    pass


class DegenerateFit(AnalysisError):
    pass


class EmptyTable(AnalysisError):
    pass


class EmptySubset(AnalysisError):
    pass


class InvalidMixture(AnalysisError):
    pass


class NotNormalized(AnalysisError):
    pass


# --- Configuration ---
class ConfigError(MziError, ValueError):
    pass
