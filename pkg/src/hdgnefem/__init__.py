"""Hybridisable discontinuous Galerkin Stokes solver with NURBS-enhanced curved
elements and degree adaptivity."""

from .adaptivity import (AdaptConfig, AdaptReport, adapt_loop, degree_increment,
                         estimate_error, postprocess, update_geometry)
from .benchmarks import Benchmark, StokesExact, benchmark_circle, benchmark_wavy_channel
from .errors import (BasisError, DataError, GeometryError, HdgError, SolverError,
                     TopologyError)
from .geometry import ISO_REGEN, NEFEM, GeometryBackend, GeometryStrategy, iso_fixed
from .hdg import (HdgSolution, ProblemSpec, SolverConfig, assemble_global, assemble_local,
                  check_compatibility, condense, solve)
from .mesh import DIRICHLET, NEUMANN, TriMesh, nested_refine, rectangle_mesh
from .nurbs import NurbsCurve, ParamInterval, circle, line, quarter_circle
from .studies import ConvergenceTable, run_adapt_compare, run_convergence

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "AdaptReport", "adapt_loop", "degree_increment", "estimate_error",
    "postprocess", "update_geometry", "Benchmark", "StokesExact", "benchmark_circle",
    "benchmark_wavy_channel", "BasisError", "DataError", "GeometryError", "HdgError",
    "SolverError", "TopologyError", "ISO_REGEN", "NEFEM", "GeometryBackend",
    "GeometryStrategy", "iso_fixed", "HdgSolution", "ProblemSpec", "SolverConfig",
    "assemble_global", "assemble_local", "check_compatibility", "condense", "solve",
    "DIRICHLET", "NEUMANN", "TriMesh", "nested_refine", "rectangle_mesh", "NurbsCurve",
    "ParamInterval", "circle", "line", "quarter_circle", "ConvergenceTable",
    "run_adapt_compare", "run_convergence",
]
