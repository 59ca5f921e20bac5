"""Exception hierarchy shared by the mesh, solver and CLI layers."""


class HypmeshError(Exception):
    """Base class for all errors raised by hypmesh."""


class DomainError(HypmeshError, ValueError):
    """Argument outside the domain where a function is defined."""


class SingularityError(HypmeshError, ValueError):
    """Evaluation at a pole or log-singularity (angle at 0 or pi)."""


class MeshParseError(HypmeshError, ValueError):
    """Malformed mesh file.

    ``line`` is the 1-based line number of the offending line, when known.
    """

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class TopologyError(HypmeshError):
    """Combinatorics unsupported by the pipeline (non-manifold, wrong genus...)."""


class NonManifoldError(TopologyError):
    pass


class ConnectivityError(TopologyError):
    pass


class DegeneracyError(HypmeshError, ValueError):
    """Zero-area (or numerically flat) triangle."""

    def __init__(self, message, face=None):
        self.face = face
        super().__init__(message)


class FeasibilityError(HypmeshError, ValueError):
    """Starting point violates the linear angle constraints."""


class PreconditionError(HypmeshError, ValueError):
    pass
