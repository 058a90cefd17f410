"""Numerical laboratory for volume-normalized mean curvature flow in the plane."""

from .forcing import ForcingLaw
from .geometry import StarShape

__version__ = "0.1.0"

__all__ = ["ForcingLaw", "StarShape", "__version__"]
