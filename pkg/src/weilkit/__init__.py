"""Weil algebras, Weil bundles of small manifolds, and the tools around them."""

from .algebra import WeilAlgebra, AlgebraElement, build_algebra, dual_numbers, real_algebra, tensor_product, truncated
from .apoint import APoint, evaluate, l_part, leibniz_residual, make_apoint, project, zero_section
from .atlas import Manifold, builtin
from .errors import WeilkitError
from .expr import eval_jet, eval_real, parse, partial_derivatives

__version__ = "0.1.0"
