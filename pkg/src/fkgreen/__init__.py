"""Transition kernels and Green's functions of second-order operators with
power-law singular coefficients: Feynman-Kac Monte Carlo over Brownian
bridges, bracketed by analytic Jensen bounds."""

from .bridge import BridgePath, RngStreamSpec, dirichlet_filter, sample_bridge
from .core import BACKEND
from .errors import (
    AccuracyError,
    DegenerateOperatorError,
    DivergentIntegralError,
    DomainError,
    FkgreenError,
    SingularityError,
)
from .potentials import (
    CompositeForm,
    DiagonalForm,
    IsotropicForm,
    MetricModel,
    PowerLawTerm,
    ScalarPotential,
    eval_V,
    metric_to_potentials,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BridgePath",
    "RngStreamSpec",
    "dirichlet_filter",
    "sample_bridge",
    "AccuracyError",
    "DegenerateOperatorError",
    "DivergentIntegralError",
    "DomainError",
    "FkgreenError",
    "SingularityError",
    "CompositeForm",
    "DiagonalForm",
    "IsotropicForm",
    "MetricModel",
    "PowerLawTerm",
    "ScalarPotential",
    "eval_V",
    "metric_to_potentials",
    "__version__",
]
