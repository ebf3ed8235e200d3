"""Adaptive SUPG finite elements for convection-dominated convection-diffusion problems."""

from .mesh import Mesh, refine, uniform_refine
from .space import DiscreteFunction, FeSpace, build_space, interpolate
from .problem import ExactSolution, ProblemSpec

__all__ = [
    "Mesh", "refine", "uniform_refine",
    "DiscreteFunction", "FeSpace", "build_space", "interpolate",
    "ExactSolution", "ProblemSpec",
]

__version__ = "0.1.0"
