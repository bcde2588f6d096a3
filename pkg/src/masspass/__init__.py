"""Constrained mountain-pass critical points on mass spheres.

Finite-dimensional Hilbert pairs, explicit sphere geodesics with radial
parallel transport, certified second-order descent deformations, and a
monotonicity-trick min-max driver producing bounded almost-critical
sequences with approximate Morse index at most one, refined into certified
constrained critical points.
"""

__version__ = "0.1.0"

from .errors import MasspassError
from .hilbert import HilbertPair, SpherePoint, TangentVector

__all__ = ["HilbertPair", "SpherePoint", "TangentVector", "MasspassError",
           "__version__"]
