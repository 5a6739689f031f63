"""Kinetic Kolmogorov solver and numerical checks of its local estimates."""

from .estimates import (HarnackGeometry, dual_norm_Hm1, harnack_chain, harnack_ratio,
                        holder_estimate, moments, moser_check, sobolev_embedding_check,
                        weak_poincare_check)
from .solver import OperatorSpec, checkerboard, solve, stable_dt

__all__ = ["OperatorSpec", "checkerboard", "solve", "stable_dt", "HarnackGeometry",
           "moser_check", "harnack_ratio", "harnack_chain", "holder_estimate",
           "dual_norm_Hm1", "weak_poincare_check", "sobolev_embedding_check", "moments"]
