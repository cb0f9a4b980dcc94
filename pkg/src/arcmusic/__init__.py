"""MUSIC imaging of sound-hard open arcs from far-field data."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ArcMusicError,
    ConfigError,
    ConsistencyError,
    DegenerateGeometryError,
    DomainError,
    NumericalError,
    SolverError,
)
