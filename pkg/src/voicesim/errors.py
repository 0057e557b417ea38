"""Exception types shared across the package."""


class VoicesimError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(VoicesimError):
    """A binary container (LRP1 repr file or SVS1 checkpoint) is malformed,
    or data violating the format invariants was asked to be written."""


class ManifestError(VoicesimError):
    """A rated-pair manifest or one of its records is invalid."""


class DimensionError(VoicesimError):
    """Shapes or dimensions of inputs are inconsistent."""


class ZeroVarianceError(VoicesimError):
    """A correlation was requested on a constant input vector."""


class ConfigError(VoicesimError):
    """A run configuration file is missing, incomplete, or inconsistent."""
