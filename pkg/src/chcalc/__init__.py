"""Exact-arithmetic engine for graded coalgebra calculus, Cartan-homotopy
module structures, Hochschild operators of A-infinity categories, and the
meromorphic connections they carry, all at finite truncation.
"""

from .coeff import Ring, Scalar, TruncationPolicy, Norm, parse_scalar
from .graded import GradedBasis, GradedElement, LinOp, koszul_sign, shuffles

__all__ = [
    "Ring", "Scalar", "TruncationPolicy", "Norm", "parse_scalar",
    "GradedBasis", "GradedElement", "LinOp", "koszul_sign", "shuffles",
]

__version__ = "0.1.0"
