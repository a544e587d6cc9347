"""Numerical laboratory for rescaled flows on twisted torus bundles over S^1.

Builds stationary fiber metrics from a holonomy, integrates the gauge-fixed
nonlinear flow, assembles and diagonalizes the linearized operators, verifies
the stability structure by direct computation, and provides closed-form
spectral calculators for the constant-curvature base cases.
"""

__version__ = "0.1.0"

from .errors import NumericalError, TorusflowError, ValidationError

__all__ = ["NumericalError", "TorusflowError", "ValidationError", "__version__"]
