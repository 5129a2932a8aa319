"""camlens: camera-lens super-resolution tooling.

Paired-image rectification, degradation modelling and analysis, full-reference
quality metrics and a small residual CNN trained from scratch.
"""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
