"""Exception types shared across the toolkit."""


class WaterlineError(Exception):
    """Base class for all domain errors raised by this package."""


class NoForegroundError(WaterlineError):
    """Raised when a mask contains no foreground pixel."""


class DegenerateRegressionError(WaterlineError):
    """Raised when a line fit is attempted on fewer than two distinct x positions."""


class NoDetectionError(WaterlineError):
    """Raised when an image has an empty detection list."""
