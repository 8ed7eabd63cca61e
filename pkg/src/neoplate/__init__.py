"""Planar plate energies with a jacobian barrier.

The library evaluates E[h] = int |Dh|^p + (det Dh)^(-q) for closed-form
and piecewise-affine maps, minimizes it over mesh deformations, builds
positive-area branch maps from a Cantor-type square construction, and
runs empirical injectivity and continuity checks.
"""

__version__ = "0.1.0"

from .analytic_maps import (AffineMap, IdentityMap, MobiusMap, ModelPhi,
                            PinchExtension, PinchMap, PinchParams,
                            RescaledMap, feasible_params, mobius_sequence,
                            parse_map, q_threshold)
from .cantor import (BranchMap, CantorConfig, Square, cantor_branch_map,
                     cantor_measure, centersquares_up_to, cornersquares,
                     default_eps, generation)
from .energy import (EnergyParams, EnergyReport, QuadratureSpec,
                     energy_analytic, energy_pl, hopf_residual,
                     identity_energy)
from .geometry import (PLMap, Rect, TriangleMesh, identity_map,
                       make_rect_mesh, unit_square)
from .minimizer import (MinimizerConfig, MinimizerError, init_minimizer,
                        minimize)
from .verify import (branch_area_report, injectivity_count, modulus_profile,
                     threshold_sweep)

__all__ = [
    "AffineMap", "BranchMap", "CantorConfig", "EnergyParams", "EnergyReport",
    "IdentityMap", "MinimizerConfig", "MinimizerError", "MobiusMap",
    "ModelPhi", "PLMap", "PinchExtension", "PinchMap", "PinchParams",
    "QuadratureSpec", "Rect", "RescaledMap", "Square", "TriangleMesh",
    "branch_area_report", "cantor_branch_map", "cantor_measure",
    "centersquares_up_to", "cornersquares", "default_eps", "energy_analytic",
    "energy_pl", "feasible_params", "generation", "hopf_residual",
    "identity_energy", "identity_map", "init_minimizer", "injectivity_count",
    "make_rect_mesh", "minimize", "mobius_sequence", "modulus_profile",
    "parse_map", "q_threshold", "threshold_sweep", "unit_square",
]
