"""Exception types shared across spikelab modules."""


class SpikelabError(Exception):
    """Base class for all spikelab errors."""


class ConfigError(SpikelabError):
    """Invalid or inconsistent run configuration."""


class DivergedEvaluation(SpikelabError):
    """A loss, gradient, or HVP evaluation produced a non-finite value."""


class DivergedRun(SpikelabError):
    """An optimizer step produced a non-finite or absurdly large parameter."""


class InvalidDirection(SpikelabError):
    """HVP requested along an all-zero direction."""


class OracleSizeExceeded(SpikelabError):
    """Dense-matrix oracle requested above its size cap."""


class ZeroGradient(SpikelabError):
    """Directional curvature requested along a zero gradient."""


class BoundaryUndefined(SpikelabError):
    """Sustained predictor queried at a series endpoint."""


class InvalidSeries(SpikelabError):
    """Series violates fit preconditions (too short or non-positive)."""


class InsufficientWindow(SpikelabError):
    """Loss series do not cover the window required around a spike event."""


class PreconditionViolation(SpikelabError):
    """Closed-form certificate requested outside its hypothesis domain."""


class OracleMisuse(SpikelabError):
    """Oracle applied to a trace of the wrong optimizer or objective kind."""


class Indeterminate(SpikelabError):
    """Classifier could not decide within its resolution near a boundary."""
