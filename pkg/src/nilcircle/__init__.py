"""Step-two nilpotent group G0(d), sparse kernels on it, and the circle-method toolkit around them."""

__version__ = "0.1.0"

from .group import (
    GroupElement,
    GroupShape,
    ShapeMismatch,
    alternating_word,
    coset_decompose,
    d_form,
    dilate,
    identity,
    inverse,
    moment_curve,
    multiply,
    shape,
)
from .rationals import RationalSet, RationalVector
from .sparse import AverageParams, SparseFunction, apply_average, average_kernel, convolve, ttstar_kernel

__all__ = [
    "__version__",
    "GroupElement",
    "GroupShape",
    "ShapeMismatch",
    "alternating_word",
    "coset_decompose",
    "d_form",
    "dilate",
    "identity",
    "inverse",
    "moment_curve",
    "multiply",
    "shape",
    "RationalSet",
    "RationalVector",
    "AverageParams",
    "SparseFunction",
    "apply_average",
    "average_kernel",
    "convolve",
    "ttstar_kernel",
]
