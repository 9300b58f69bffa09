"""Exception types raised across the package."""


class SliceTelError(Exception):
    """Base class for all package errors."""


class ConfigError(SliceTelError, ValueError):
    """Invalid workload, topology, simulation or experiment configuration."""

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = list(fields or [])


class AbsentMetricError(SliceTelError, KeyError):
    """A slice does not define an SLA target for the requested metric."""


class InsufficientDataError(SliceTelError, ValueError):
    """Not enough samples to fit a difference distribution."""


class HeaderOverflowError(SliceTelError):
    """Inserting telemetry would exceed the configured header headroom."""


class HeaderDecodeError(SliceTelError, ValueError):
    """Malformed telemetry header bytes."""


class FallbackRequired(SliceTelError):
    """The exact solver ran out of time without a feasible incumbent."""
