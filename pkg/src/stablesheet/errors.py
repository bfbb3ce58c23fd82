"""Exception hierarchy shared by all stablesheet modules."""


class StableSheetError(Exception):
    """Base class for everything raised deliberately by this package."""


class ParameterError(StableSheetError, ValueError):
    """A parameter is outside its admissible domain."""


class RegimeError(ParameterError):
    """Exponent/stability-index combination outside the admissible regime."""


class OrderingError(ParameterError):
    """Hurst entries not sorted in nondecreasing order."""


class UnsupportedOrderError(ParameterError):
    """Requested wavelet order outside the supported range."""


class InsufficientDataError(StableSheetError):
    """Not enough samples (or exceedances) for the requested estimate."""


class WindowError(StableSheetError):
    """Tabulation window too small; carries a usable suggestion."""

    def __init__(self, msg, suggested_window=None):
        super().__init__(msg)
        self.suggested_window = suggested_window


class ResolutionError(StableSheetError):
    """Grid spacing too coarse for the requested scales."""

    def __init__(self, msg, required_spacing=None):
        super().__init__(msg)
        self.required_spacing = required_spacing


class DomainError(StableSheetError):
    """Noise or evaluation domain too small; carries the required extent."""

    def __init__(self, msg, required_radius=None):
        super().__init__(msg)
        self.required_radius = required_radius


class QuadratureError(StableSheetError):
    """Numerical quadrature failed to reach the requested tolerance."""


class ScaleRangeError(StableSheetError):
    """Box-counting scale range unusable (too narrow or undersampled)."""


class ConfigError(StableSheetError):
    """Invalid or inconsistent run configuration."""
