"""Spreading speeds of bulk-surface reaction-diffusion systems on cylinders."""

from .coeffs import CoeffExpr, ProblemParams, parse_expr
from .eigsolver import EigenPair, lambda_of_alpha, principal_eigenpair
from .geometry import FourierShape, Mesh, build_mesh
from .optimizer import Constraint, OptimOptions, OptimRun, optimize, optimize_free_disk_check
from .shape_grad import ShapeGradient, fourier_gradient, shape_integrand
from .speed import SpeedOptions, SpeedResult, spreading_speed, sweep

__version__ = "0.1.0"

__all__ = [
    "CoeffExpr",
    "Constraint",
    "EigenPair",
    "FourierShape",
    "Mesh",
    "OptimOptions",
    "OptimRun",
    "ProblemParams",
    "ShapeGradient",
    "SpeedOptions",
    "SpeedResult",
    "build_mesh",
    "fourier_gradient",
    "lambda_of_alpha",
    "optimize",
    "optimize_free_disk_check",
    "parse_expr",
    "principal_eigenpair",
    "shape_integrand",
    "spreading_speed",
    "sweep",
]
