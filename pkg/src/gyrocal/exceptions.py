"""Package exception types."""


class GyrocalError(Exception):
    """Base class for package errors."""


class MalformedStreamError(GyrocalError, ValueError):
    """Sample stream violates its contract (timestamps, rates, columns)."""


class InvalidCorrectionError(GyrocalError, ValueError):
    """Sensor-error estimate is outside the range where correction is trusted."""


class DegenerateGeometryError(GyrocalError, ValueError):
    """Vector geometry too close to singular for the requested operation."""


class AlignmentDeferred(GyrocalError, RuntimeError):
    """Initial alignment not possible from the given samples; retry later."""


class ReferenceUnavailableError(GyrocalError, RuntimeError):
    """Scenario tail is not quasi-static; no reference bias can be computed."""
