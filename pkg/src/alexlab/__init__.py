"""Comparison-geometry laboratory: model planes, sampled metric spaces and
numerical checks of volume, excess and critical-point inequalities."""

__version__ = "0.1.0"

from .model_plane import (  # noqa: E402
    DomainError,
    ModelPlane,
    comparison_angle,
    hyperbolic_excess_lower_bound,
    jacobi_s,
)
from .report import VerificationReport  # noqa: E402

__all__ = [
    "DomainError",
    "ModelPlane",
    "VerificationReport",
    "comparison_angle",
    "hyperbolic_excess_lower_bound",
    "jacobi_s",
]
