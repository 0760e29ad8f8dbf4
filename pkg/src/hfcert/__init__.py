"""Certified Hartree-Fock critical points on the Grassmann manifold."""

__version__ = "0.1.0"

from .errors import (ConsistencyError, ConstructionError, HFCertError, HypothesisError,
                     InvalidInputError, SingularityError, SolverError)
from .matnorm import WeightSet, norm_one_inf, norm_weighted, validate_weights, weights_from_points
from .grassmann import GrassmannPoint, canonical_point, retract
from .integrals import IntegralSet, SyntheticParams, generate_synthetic, transform_basis, validate
from .conditions import ConditionReport, contraction_bound_check, measure
from .kantorovich import (KantorovichCertificate, NewtonTrace, certify, displacement_check,
                          lipschitz_constants, newton_solve)
from .ortho import OrthoResult, epsilon_chain, orthogonalize_pipeline, propagate_constants, schmidt

__all__ = [name for name in dir() if not name.startswith("_")]
