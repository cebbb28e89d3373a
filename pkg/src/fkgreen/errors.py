"""Exception hierarchy shared by all fkgreen modules."""


class FkgreenError(Exception):
    """Base class for all library errors."""


class DomainError(FkgreenError, ValueError):
    """An argument lies outside the mathematically admissible range."""


class DivergentIntegralError(DomainError):
    """The requested integral does not converge for these parameters."""


class SingularityError(DomainError):
    """Evaluation exactly at a non-integrable singular point."""


class AccuracyError(FkgreenError, RuntimeError):
    """A quadrature failed to reach its tolerance after maximal refinement."""


class DegenerateOperatorError(FkgreenError, RuntimeError):
    """The discretized operator is singular and cannot be inverted."""
