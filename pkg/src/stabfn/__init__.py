"""Numerical stability functions for torus and matrix quotients of flat Kähler spaces."""

__version__ = "0.1.0"

from .geometry import (
    DelzantPolytope,
    WeightSystem,
    full_torus,
    is_stable,
    lattice_points,
    list_presets,
    moment_map,
    preset,
    product_system,
)
from .kempf_ness import solve_abelian, solve_chain, solve_grassmannian, solve_polygon
from .matrix_varieties import MatrixChainSpec, QuiverSpec, generate_level_point
from .sections import MonomialSection, l2_norm_downstairs, l2_norm_upstairs, volume_function
from .stability import (
    StabilityEvaluation,
    ToricMetric,
    psi_coadjoint,
    psi_grassmannian,
    psi_hirzebruch,
    psi_legendre,
    psi_polygon,
    psi_toric,
)

__all__ = [
    "__version__",
    "WeightSystem",
    "DelzantPolytope",
    "preset",
    "list_presets",
    "full_torus",
    "product_system",
    "lattice_points",
    "is_stable",
    "moment_map",
    "solve_abelian",
    "solve_grassmannian",
    "solve_chain",
    "solve_polygon",
    "MatrixChainSpec",
    "QuiverSpec",
    "generate_level_point",
    "MonomialSection",
    "l2_norm_upstairs",
    "l2_norm_downstairs",
    "volume_function",
    "StabilityEvaluation",
    "ToricMetric",
    "psi_toric",
    "psi_hirzebruch",
    "psi_legendre",
    "psi_grassmannian",
    "psi_coadjoint",
    "psi_polygon",
]
