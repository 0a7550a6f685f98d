"""Pore-to-Darcy simulation toolkit for evaporation in porous media."""

from .constitutive import (
    DimensionlessReport,
    ModelParams,
    ScaleSet,
    dimensionless_audit,
    double_well,
    evaporation_rate,
    mixture,
)
from .fields import FaceField, ScalarField, VectorField
from .geometry import GeometryError, UnitCellGeometry, build_geometry
from .linsolve import LinearSystem, SolverError, solve_linear
from .phasefield import (
    PhaseFieldState,
    allen_cahn_step,
    equilibrium_profile,
    gradient_energy_integral,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionlessReport",
    "FaceField",
    "GeometryError",
    "LinearSystem",
    "ModelParams",
    "PhaseFieldState",
    "ScalarField",
    "ScaleSet",
    "SolverError",
    "UnitCellGeometry",
    "VectorField",
    "allen_cahn_step",
    "build_geometry",
    "dimensionless_audit",
    "double_well",
    "equilibrium_profile",
    "evaporation_rate",
    "gradient_energy_integral",
    "mixture",
    "solve_linear",
]
