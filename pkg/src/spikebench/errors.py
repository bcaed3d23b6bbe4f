"""Exception types raised across the package.

Invalid arguments raise plain :class:`ValueError`; the classes here mark
failures that callers (chiefly the CLI) need to tell apart.
"""


class ConfigError(ValueError):
    """A configuration refers to something that does not exist or is inconsistent."""


class DatasetParseError(ValueError):
    """A dataset container is malformed. ``field`` names the offending entry."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"malformed dataset field {field!r}")


class MeasurementError(RuntimeError):
    """A quantity cannot be measured from the given data."""


class CapacityError(ValueError):
    """A matrix mapping needs more crossbar tiles than are available."""

    def __init__(self, required, available):
        self.required = required
        self.available = available
        super().__init__(f"mapping needs {required} tiles, crossbar has {available}")


class StageError(RuntimeError):
    """A pipeline stage failed during a run. ``stage`` names it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
