"""Exception types shared across the package."""


class ExbcError(Exception):
    """Base class for all package errors."""


class DimensionError(ExbcError):
    """A state/action array has the wrong dimension for its buffer or net."""


class EmptyBufferError(ExbcError):
    """Sampling was requested from a buffer with no entries."""


class ExampleFormatError(ExbcError):
    """An example file is malformed, empty, or has the wrong version."""


class CheckpointError(ExbcError):
    """A checkpoint file failed the integrity or version check."""


class ConfigError(ExbcError):
    """A config file is invalid: unknown key, bad type, or bad value."""


class GradientError(ExbcError):
    """A non-finite gradient was produced; names the offending block."""


class ConvergenceError(ExbcError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class ExpertFailure(ExbcError):
    """A scripted expert failed to produce a success state within its retry budget."""
