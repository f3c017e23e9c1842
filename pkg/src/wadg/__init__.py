"""Weighted and weight-adjusted discontinuous Galerkin methods for acoustics on triangles."""

from .quadrature import QuadratureRule1D, QuadratureRule2D, gauss_1d, triangle_quadrature
from .reference import ReferenceElement, build_nodes, build_operators, orthonormal_basis_eval
from .mesh import Mesh2D, geometric_factors, load_mesh, uniform_tri_mesh
from .material import WeightField, builtin_field, parse_field, sample
from .weighted import (WeightedOps, SingularMassMatrixError, conservation_correction,
                       solve_projection_triple)
from .solver import (Discretization, SolverConfig, WaveState, compute_rhs, energy,
                     manufactured_problem, run, step_rk)
from .harness import ExperimentConfig, RateTable, estimate_rate, run_experiment, write_csv

__version__ = "0.1.0"

__all__ = [
    "QuadratureRule1D", "QuadratureRule2D", "gauss_1d", "triangle_quadrature",
    "ReferenceElement", "build_nodes", "build_operators", "orthonormal_basis_eval",
    "Mesh2D", "geometric_factors", "load_mesh", "uniform_tri_mesh",
    "WeightField", "builtin_field", "parse_field", "sample",
    "WeightedOps", "SingularMassMatrixError", "conservation_correction",
    "solve_projection_triple",
    "Discretization", "SolverConfig", "WaveState", "compute_rhs", "energy",
    "manufactured_problem", "run", "step_rk",
    "ExperimentConfig", "RateTable", "estimate_rate", "run_experiment", "write_csv",
]
