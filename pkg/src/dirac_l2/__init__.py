"""Weighted L2 estimates for the Clifford-valued Dirac operator: algebra, fields, quadrature,
identity checks, the exterior counterexample and a discrete minimal-norm solver."""
from .clifford import Multivector, basis_product, conj, gmul, inner, paravector
from .errors import ConfigurationError, DomainError, PreconditionError, UsageError
from .fields import CliffordField, Weight, bump_field, dirac, gen_monogenic_poly, kelvin, weight_builtin
from .quadrature import QuadratureSpec, annulus, box, exterior_truncated, weighted_inner

__version__ = "0.1.0"

__all__ = [
    "CliffordField", "ConfigurationError", "DomainError", "Multivector", "PreconditionError",
    "QuadratureSpec", "UsageError", "Weight", "annulus", "basis_product", "box", "bump_field", "conj",
    "dirac", "exterior_truncated", "gen_monogenic_poly", "gmul", "inner", "kelvin", "paravector",
    "weight_builtin", "weighted_inner",
]
