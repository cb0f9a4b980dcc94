"""Exception hierarchy shared by all pipeline stages."""


class ArcMusicError(Exception):
    """Base class for errors raised by this package."""


class DomainError(ArcMusicError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateGeometryError(ArcMusicError, ValueError):
    """An arc has a vanishing tangent, self-intersects, or overlaps another arc."""


class ConsistencyError(ArcMusicError, ValueError):
    """Objects built for different arcs or wavenumbers were combined."""


class SolverError(ArcMusicError, RuntimeError):
    """The discrete boundary integral system is singular or ill-conditioned."""


class NumericalError(ArcMusicError, RuntimeError):
    """A numerical routine failed or received degenerate data."""


class ConfigError(ArcMusicError, ValueError):
    """Invalid run configuration."""
