"""Exception types shared across the package."""


class HolodiscError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(HolodiscError):
    """Inconsistent or unsupported configuration."""


class DataError(HolodiscError):
    """Missing, malformed, or insufficient input data."""


class StabilityError(HolodiscError):
    """Time integration produced non-finite values."""


class ReductionError(HolodiscError):
    """Invalid symbolic convolution term (e.g. non-positive decay rate)."""
