"""Numerical laboratory for two-phase p-degenerate free boundary energies."""

from fblab.mesh import Domain, Grid, DiscreteFunction, build_grid
from fblab.model import ProblemSpec, SourceSpec, BoundarySpec, ExponentInputs

__all__ = [
    "Domain",
    "Grid",
    "DiscreteFunction",
    "build_grid",
    "ProblemSpec",
    "SourceSpec",
    "BoundarySpec",
    "ExponentInputs",
]

__version__ = "0.1.0"
