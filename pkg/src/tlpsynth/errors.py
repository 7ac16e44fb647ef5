"""Exception types raised by tlpsynth.

Every domain failure derives from :class:`TlpError`, which is what the CLI
maps to exit status 1.
"""


class TlpError(ValueError):
    """Base class for all domain errors."""


class TraceFormatError(TlpError):
    """A trace document or record violates the trace format or invariants."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ImageFormatError(TlpError):
    """An image file or raster is not a valid W x W RGB8 trace image."""


class DimensionMismatch(TlpError):
    """Two inputs that must share a shape do not."""


class ExtractorError(TlpError):
    """Embedding extraction, loading, or matching failed."""


class ConfigError(TlpError):
    """Invalid calibration, metric, or pipeline configuration."""
