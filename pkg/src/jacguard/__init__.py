"""Conservative validity checks for deforming polynomial finite elements."""

from .batch import MeshQuery, MeshResult, max_valid_step_mesh
from .checker import (
    GAVE_UP, INVALID, INVERSION, UNDECIDED, VALID, VALID_THROUGHOUT,
    BadAccuracy, Checker, DynamicResult, InvalidAtStart, StaticResult, Witness,
    check_static, max_valid_step, verify_witness,
)
from .elements import CLASSES, MAX_ORDER, UnsupportedOrder, element_class
from .jacobian import ElementSpec, bezier_coeffs, exact_jacobian
from .quadrature import (
    Divergent, QuadratureRule, adaptive_rule, build_leaves, build_rule, integrate,
)

__all__ = [
    "CLASSES", "MAX_ORDER", "GAVE_UP", "INVALID", "INVERSION", "UNDECIDED", "VALID",
    "VALID_THROUGHOUT", "BadAccuracy", "Checker", "Divergent", "DynamicResult",
    "ElementSpec", "InvalidAtStart", "MeshQuery", "MeshResult", "QuadratureRule",
    "StaticResult", "UnsupportedOrder", "Witness", "adaptive_rule", "bezier_coeffs",
    "build_leaves", "build_rule", "check_static", "element_class", "exact_jacobian",
    "integrate", "max_valid_step", "max_valid_step_mesh", "verify_witness",
]
