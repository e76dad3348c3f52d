"""Exception hierarchy shared across the package."""


class HdgError(Exception):
    """Base class for all errors raised by hdgnefem."""


class GeometryError(HdgError, ValueError):
    """Invalid or degenerate geometry (curves, charts, elements)."""


class TopologyError(HdgError, ValueError):
    """Inconsistent mesh connectivity."""


class BasisError(HdgError):
    """Polynomial basis could not be constructed (ill-conditioned nodal set)."""


class SolverError(HdgError):
    """Local or global linear system could not be solved."""


class DataError(HdgError, ValueError):
    """Problem data violating a consistency requirement."""
