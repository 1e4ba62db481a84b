"""dira: CSI acceleration-jerk sensing with diffusion-based data augmentation."""

from .channel import (
    SPEED_OF_LIGHT,
    ChannelConfig,
    CsiFrame,
    PathParams,
    conjugate_multiply,
    remove_static,
    synthesize_csi,
)
from .errors import (
    ConfigurationError,
    ContainerFormatError,
    DataError,
    DiraError,
    EstimationError,
    NumericError,
    TrainingError,
    UsageError,
)
from .spectrum import (
    AjSpectrum,
    CorrelationGrid,
    CorrelationParams,
    PeakEstimate,
    SpectrumMeta,
    compute_aj_spectrum,
    default_correlation_params,
    detect_peaks,
    estimate_targets,
    keystone_transform,
    self_correlate,
)

__version__ = "0.1.0"
