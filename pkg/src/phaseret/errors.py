"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Raised for malformed rasters: wrong shape, odd sides, non-finite data."""


class InconsistentSpectrumError(ValueError):
    """Raised when a spectrum or magnitude data set cannot come from a real image."""


class PlacementError(RuntimeError):
    """Raised when a scene generator cannot place its objects after bounded retries."""


class SpectralOverlapError(ValueError):
    """Raised when wave packets of a microlocal construction overlap in frequency."""


class CheckFailure(RuntimeError):
    """Raised by the harness when an experiment's built-in check does not hold."""
