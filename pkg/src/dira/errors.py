"""Exception hierarchy for the dira package.

The CLI maps these onto exit codes: UsageError -> 1, the data/numeric
family -> 2.
"""


class DiraError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DiraError):
    """Invalid configuration value or inconsistent dimensions."""


class UsageError(DiraError):
    """API or CLI misuse (untrained model, bad flag, shape mismatch)."""


class DataError(DiraError):
    """Bad or missing data (empty dataset, corrupt file payload)."""


class ContainerFormatError(DataError):
    """On-disk container violates its format contract."""


class EstimationError(DiraError):
    """Signal too short or otherwise unusable for parameter estimation."""


class TrainingError(DiraError):
    """Training diverged or could not proceed."""


class NumericError(DiraError):
    """Non-finite values encountered mid-computation."""
