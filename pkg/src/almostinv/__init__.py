"""Numerical companion for rank-one perturbations with invariant half-spaces.

Operators are truncated to ``D`` coordinates; functionals act through the
bilinear pairing, so the adjoint is the matrix transpose.  See the README
for the pipeline overview.
"""

from .errors import *  # noqa: F401,F403
from .operators import (BackwardShift, Dense, Diagonal, ForwardShift, Nilpotent, OperatorRep,
                        adjoint, basis_vector, dense, identity, make_operator, operator_norm,
                        resolvent_solve, spectral_radius)
from .resolvent import (ApproachSchedule, ResolventFamily, boundary_hypothesis, build_family,
                        growth_diagnostic, select_estar, wstar_decay_diagnostic)
from .biorthogonal import BiorthogonalSystem, biorthogonal_from_family, dual_system
from .halfspace import (HalfSpaceRep, defect_estimate, invariance_residual,
                        perturbation_from_defect, preannihilator, rank_one_defect_data)
from .perturbation import PerturbationRep, defect_one_construction, small_norm_rank_one
from .bridge import assemble_small_norm, bridge_operator, kernel_range, scaled_bridge
from .structure import (dense_range_chain, eigen_halfspace, orbit_minimality,
                        partition_residual, riesz_projection)
from .scenario import ScenarioConfig, load_config, run_scenario

__version__ = "0.1.0"
