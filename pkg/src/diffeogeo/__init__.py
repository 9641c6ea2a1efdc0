"""Geodesics, curvature and distances for diffeomorphism groups and landmark spaces."""
from .exceptions import (
    BlowUp,
    DegenerateConfig,
    GeometryError,
    IllConditioned,
    NotConverged,
    NotDiffeo,
    OrderTooLow,
    OutOfChart,
)
from .kernels import KernelSpec

__version__ = "0.1.0"

__all__ = [
    "BlowUp",
    "DegenerateConfig",
    "GeometryError",
    "IllConditioned",
    "KernelSpec",
    "NotConverged",
    "NotDiffeo",
    "OrderTooLow",
    "OutOfChart",
    "__version__",
]
