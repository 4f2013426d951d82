"""Exception types shared across the package."""


class SurroundCodError(ValueError):
    """Base class for all errors raised by this package."""


class DimensionError(SurroundCodError):
    """Array shapes are incompatible with the requested operation."""


class ParameterError(SurroundCodError):
    """A scalar parameter is outside its admissible range."""


class ValidationError(SurroundCodError):
    """Input data violates a documented invariant (e.g. a non-binary mask)."""


class KernelError(SurroundCodError):
    """A convolution kernel is malformed or too large for the input."""


class LayoutError(SurroundCodError):
    """A tensor does not match the channel layout expected by a transform."""


class EvaluationError(SurroundCodError):
    """A user-supplied function returned a non-finite or malformed value."""


class ConfigError(SurroundCodError):
    """A configuration file or model/input combination is inconsistent."""
