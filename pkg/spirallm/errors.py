"""Exception hierarchy shared by every spirallm module.

Each leaf also derives from the closest builtin exception, so callers that
only know about ``ValueError`` or ``ArithmeticError`` keep working.
"""


class SpiralError(Exception):
    """Base class for all spirallm errors."""


class ConfigError(SpiralError, ValueError):
    """Invalid or unknown configuration values."""


class SpecError(ConfigError):
    """A synthetic task specification cannot be satisfied."""


class DataError(SpiralError, ValueError):
    """Corpus, checkpoint or input data is unusable."""


class InputError(DataError):
    """Bad ids, unknown tokens or empty inputs."""


class MalformedSequenceError(DataError):
    """A reformed sequence or trace does not replay to a sentence."""


class CheckpointError(DataError):
    """A checkpoint file has the wrong magic, version or layout."""


class InvalidOrderingError(SpiralError, ValueError):
    """An ordering or start span violates its preconditions."""


class OrderingSizeError(InvalidOrderingError):
    """Enumeration requested for a sentence that is too long."""


class DimensionError(SpiralError, ValueError):
    """Operand shapes are incompatible."""


class NumericError(SpiralError, ArithmeticError):
    """A computation produced NaN or Inf."""


class UsageError(SpiralError, RuntimeError):
    """An API was called in a state where it cannot work."""
