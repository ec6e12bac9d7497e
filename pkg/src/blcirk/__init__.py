"""Band-limited collocation implicit Runge–Kutta (BLC-IRK) toolkit.

Quadratures for band-limited exponentials, symplectic collocation
tableaus built three ways, A-stability checks, an exact-linear-part
stage solver and a spherical-harmonic orbit propagator.
"""

from ._accel import NUMBA_ENABLED
from .quadrature import QuadratureRule, build_quadrature, verify_quadrature
from .prolate import ProlateBasis, build_prolate_basis
from .tableau import Tableau
from .solver import OdeSystem, ScheduleStep, SolverOptions, propagate, solve_interval

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED", "QuadratureRule", "build_quadrature", "verify_quadrature",
    "ProlateBasis", "build_prolate_basis", "Tableau", "OdeSystem", "ScheduleStep",
    "SolverOptions", "propagate", "solve_interval", "__version__",
]
