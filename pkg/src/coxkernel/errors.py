"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage/parameter problems exit 1,
data problems exit 2, numerical failures exit 3.
"""


class CoxKernelError(Exception):
    """Base class for all package errors."""


class ParameterError(CoxKernelError, ValueError):
    """A parameter is outside its documented range."""


class InvalidBandwidthError(ParameterError):
    """Bandwidth is non-positive or otherwise unusable."""


class BandwidthTooLargeError(InvalidBandwidthError):
    """Kernel support 2bh does not fit inside the observation window."""


class InvalidDataError(CoxKernelError, ValueError):
    """Arrival data violates its invariants."""


class EmptyDataError(InvalidDataError):
    """An operation requires at least one event."""


class IngestError(InvalidDataError):
    """A data file could not be parsed; message names the offending line."""


class LagOutOfRangeError(ParameterError):
    """Requested lag does not fit in the usable window T - 2bh."""


class StaticRateError(CoxKernelError):
    """An operation needed the optimal bandwidth, but bandwidth selection
    reported a static rate (no detectable fluctuation)."""


class SimulationError(CoxKernelError, RuntimeError):
    """A simulator could not produce an exact draw."""
