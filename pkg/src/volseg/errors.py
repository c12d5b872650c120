"""Exception hierarchy shared across the engine."""


class VolsegError(Exception):
    """Base class for all engine errors."""


class FileFormatError(VolsegError):
    """Raised for malformed or inconsistent volume / weight files."""


class GeometryMismatchError(VolsegError):
    """Raised when two volumes disagree on shape, spacing, origin or orientation."""


class WeightStoreError(VolsegError):
    """Raised when a weight store does not match the network that consumes it."""


class SpecError(VolsegError):
    """Raised for invalid network or pipeline configuration."""
