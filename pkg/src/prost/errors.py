"""Exception types shared across the package."""

__all__ = [
    "ProstError",
    "ConfigError",
    "DimensionError",
    "NonFiniteError",
    "CodecError",
    "SequenceError",
    "SnapshotError",
]


class ProstError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ProstError, ValueError):
    """Invalid parameter or configuration value."""


class DimensionError(ProstError, ValueError):
    """Shapes or lengths of inputs do not agree."""


class NonFiniteError(ProstError, ValueError):
    """Input data contains NaN or infinity."""


class CodecError(ProstError, ValueError):
    """Malformed or unsupported image file."""


class SequenceError(ProstError, ValueError):
    """Frame sequence is inconsistent with its declared layout."""


class SnapshotError(ProstError, ValueError):
    """Snapshot file is malformed or does not match the given parameters."""
