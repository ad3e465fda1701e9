"""Interface dynamics in a rotating Hele-Shaw cell with Coriolis effects."""

from .dispersion import classify_stability, compute_l_n, compute_q_n, dispersion_table
from .evolution import simulate, velocity_functional
from .geometry import InterfaceShape, mode_shape
from .params import DerivedCoeffs, PhysicalParams, derive_coefficients, derived_coefficients

__version__ = "0.1.0"

__all__ = [
    "DerivedCoeffs",
    "InterfaceShape",
    "PhysicalParams",
    "classify_stability",
    "compute_l_n",
    "compute_q_n",
    "derive_coefficients",
    "derived_coefficients",
    "dispersion_table",
    "mode_shape",
    "simulate",
    "velocity_functional",
]
