"""Half-space heat flow with a nonlinear boundary flux and a critical boundary potential.

Subpackages are organised bottom-up: :mod:`grid` (cells and sampled fields),
:mod:`lorentz` (rearrangements and Lorentz norms), :mod:`kernel` (heat
kernels), :mod:`operators` (semigroup and Duhamel quadratures),
:mod:`solver` (Picard iteration) and :mod:`verify` (numerical checks).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DomainError,
    HalfHeatError,
    HypothesisViolation,
    NumericalFailure,
    PreconditionError,
    RangeError,
    SamplingError,
)
from .grid import BoundaryFunction, Grid, GridFunction, GridSpec, build_grid, sample_boundary, sample_field  # noqa: E402
from .lorentz import LorentzIndex, norm, quasi_norm_star, rearrangement, xpq_norm  # noqa: E402
from .operators import HeatOperators, Nonlinearity, Pole, Potential, Trajectory, evaluate_potential  # noqa: E402
from .solver import SolverConfig, calibrate, check_admissibility, contraction_report, picard_solve  # noqa: E402

__all__ = [
    "BoundaryFunction", "ConfigurationError", "DomainError", "Grid", "GridFunction", "GridSpec",
    "HalfHeatError", "HeatOperators", "HypothesisViolation", "LorentzIndex", "Nonlinearity",
    "NumericalFailure", "Pole", "Potential", "PreconditionError", "RangeError", "SamplingError",
    "SolverConfig", "Trajectory", "build_grid", "calibrate", "check_admissibility",
    "contraction_report", "evaluate_potential", "norm", "picard_solve", "quasi_norm_star",
    "rearrangement", "sample_boundary", "sample_field", "xpq_norm",
]
