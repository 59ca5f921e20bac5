"""Planar triangle mesh improvement by maximising the hyperbolic volume of
an angle structure under angle-sum and holonomy constraints."""

from .errors import (
    ConnectivityError,
    DegeneracyError,
    DomainError,
    FeasibilityError,
    HypmeshError,
    MeshParseError,
    NonManifoldError,
    PreconditionError,
    SingularityError,
    TopologyError,
)
from .mesh import CutMap, EmbeddedMesh, MeshTopology
from .optimizer import SolverConfig, SolveTrace
from .pipeline import PipelineConfig, improve_mesh, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ConnectivityError",
    "CutMap",
    "DegeneracyError",
    "DomainError",
    "EmbeddedMesh",
    "FeasibilityError",
    "HypmeshError",
    "MeshParseError",
    "MeshTopology",
    "NonManifoldError",
    "PipelineConfig",
    "PreconditionError",
    "SingularityError",
    "SolveTrace",
    "SolverConfig",
    "TopologyError",
    "improve_mesh",
    "run_pipeline",
]
