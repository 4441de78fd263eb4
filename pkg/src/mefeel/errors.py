"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid architecture, dataset parameters or simulation config."""


class ShapeError(ValueError):
    """Array shapes that do not line up with the model."""


class FormatError(ValueError):
    """Malformed input file; the message names the offending field."""


class SchedulingError(RuntimeError):
    """A device cannot take part in a round (e.g. it holds no data)."""


class CapacityError(ValueError):
    """Problem instance too large for exhaustive enumeration."""
