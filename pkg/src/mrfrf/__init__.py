"""Fast-rate FRF identification from fast-rate inputs and slow-rate outputs."""
from .estimator import (
    EstimatorConfig,
    FrfEstimate,
    ParameterVector,
    identify_frf,
    validate_config,
)
from .lti import NoiseSpec, RationalSystem, freqresp, make_resonant_plant, simulate
from .signals import MultisineSpec, Spectrum, TimeSignal, dft, downsample, generate_multisine

__version__ = "0.1.0"
