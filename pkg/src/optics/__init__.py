from .elements import ModeState, Unitary2, apply_element, compose, compose_all, is_unitary
from .interferometer import (
    OutputAmplitudes,
    PipelineConfig,
    PortIntensities,
    beam_splitter,
    fringe_to_df,
    intensities,
    phase_plate,
    propagate,
)
