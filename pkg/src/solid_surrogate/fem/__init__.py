"""
Finite Element Package

Plane-strain Neo-Hookean engine used to generate ground-truth
force-displacement data.
"""

from .assembly import assemble, external_force, internal_force, internal_force_scale
from .dataset import Dataset, generate_dataset
from .material import (
    DeformationState,
    MaterialParams,
    lame_from_engineering,
    material_tangent,
    piola_stress,
    strain_energy,
)
from .mesh import BeamGeometry, LoadKind, LoadSpec, Mesh2D, build_cantilever_mesh
from .solver import DisplacementField, SolveSettings, solve_static

__all__ = [
    "assemble",
    "external_force",
    "internal_force",
    "internal_force_scale",
    "Dataset",
    "generate_dataset",
    "DeformationState",
    "MaterialParams",
    "lame_from_engineering",
    "material_tangent",
    "piola_stress",
    "strain_energy",
    "BeamGeometry",
    "LoadKind",
    "LoadSpec",
    "Mesh2D",
    "build_cantilever_mesh",
    "DisplacementField",
    "SolveSettings",
    "solve_static",
]
