"""Discrete Painleve V and VI as isomonodromy of 2x2 difference connections."""
from .algebra import DualCx, LaurentTail, Mat2Poly, Poly, ProjVal, precision
from .connection import (THETA_STAR, THETA_VI_STAR, DConn, DConnError, FormalType, PQPoint,
                         ThetaV, ThetaVI, coordinates_of, formal_type, from_coordinates,
                         validate_matrix, validate_theta)
from .degeneration import DegenerationConfig, dpv_limit_residual, pvi_limit_residual
from .flow import (FlowState, RhoPath, epsilon_deformation_field, integrate_flow,
                   pvi_ode_residual, pvi_vector_field)
from .maps import (IndeterminatePoint, MapError, asymmetric_form, dpv_step, dpv_step_inverse,
                   dpvi_step, dpvi_step_inverse)
from .modification import finite_elementary_modification, intertwiner_solve, scalar_multiply

__all__ = [
    "DualCx", "LaurentTail", "Mat2Poly", "Poly", "ProjVal", "precision",
    "THETA_STAR", "THETA_VI_STAR", "DConn", "DConnError", "FormalType", "PQPoint", "ThetaV",
    "ThetaVI", "coordinates_of", "formal_type", "from_coordinates", "validate_matrix",
    "validate_theta", "DegenerationConfig", "dpv_limit_residual", "pvi_limit_residual",
    "FlowState", "RhoPath", "epsilon_deformation_field", "integrate_flow", "pvi_ode_residual",
    "pvi_vector_field", "IndeterminatePoint", "MapError", "asymmetric_form", "dpv_step",
    "dpv_step_inverse", "dpvi_step", "dpvi_step_inverse", "finite_elementary_modification",
    "intertwiner_solve", "scalar_multiply",
]
