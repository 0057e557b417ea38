class ExtractorError(Exception):
    """Base class for every error this package raises on purpose."""


class AudioError(ExtractorError):
    """Undecodable, empty, too-short, or over-length audio input."""


class ModelError(ExtractorError):
    """Model loading failure or output violating the documented contract."""


class ManifestError(ExtractorError):
    """Bad pair listing or missing extraction outputs."""
