"""Numerical toolkit for degenerate Kolmogorov operators."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: F401
