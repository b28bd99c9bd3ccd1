"""Numerics for weighted Bergman spaces with rapidly decreasing radial weights:
weights, moment tables and kernels, the tau-metric, composition operator
diagnostics, Hilbert-Schmidt integrals and inequality probes."""
from .errors import BergmanKitError
from .weights import RadialWeight, WeightSpec, make_weight

__version__ = "0.1.0"

__all__ = ["BergmanKitError", "RadialWeight", "WeightSpec", "make_weight", "__version__"]
