"""Exception hierarchy shared across the package."""


class UwbimError(Exception):
    """Base class for all package-specific errors."""


class FrequencyOutOfRange(UwbimError):
    """Requested frequency lies outside a medium's sampled band."""


class InvalidRange(UwbimError):
    """Perturbation bounds are not a valid fraction range."""


class InvalidParameter(UwbimError):
    """A synthesis parameter is nonpositive or inconsistent."""


class PointNotExterior(UwbimError):
    """A point expected outside the cylinder lies on or inside it."""


class PointNotInterior(UwbimError):
    """A point expected strictly inside the cylinder lies on or outside it."""


class SolverError(UwbimError):
    """The refraction solver produced a result that violates its own bounds."""


class NoPath(UwbimError):
    """No propagation path exists between an antenna and a focal point."""


class NyquistViolation(UwbimError):
    """A requested spectral frequency is at or above the trace Nyquist limit."""


class IncompleteDataset(UwbimError):
    """A multistatic dataset is missing one or more (tx, rx) traces."""


class DegenerateImage(UwbimError):
    """An image metric is undefined (for example, mean pixel value is zero)."""


class DegenerateIdeal(UwbimError):
    """The ideal reference profile is identically zero."""


class GridMismatch(UwbimError):
    """Two grids expected to be identical differ in geometry or mask."""


class ConfigError(UwbimError):
    """A run configuration file is malformed or inconsistent."""
