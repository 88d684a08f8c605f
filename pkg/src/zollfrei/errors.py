"""Exception hierarchy shared by all modules."""


class ZollfreiError(Exception):
    """Base class for all package errors."""


class ContractViolation(ZollfreiError, ValueError):
    """An input violates a documented precondition."""


class ChartDomainError(ZollfreiError, ValueError):
    """A point lies outside the domain of a coordinate chart."""


class FrameError(ZollfreiError):
    """Gram-Schmidt could not produce a pseudo-orthonormal frame."""


class SignatureError(ZollfreiError):
    """A quadratic form does not have split signature (2, 2)."""


class IntegrationError(ZollfreiError):
    """An ODE integration failed; ``partial`` holds what was computed."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class IntegrabilityError(ZollfreiError):
    """A beta-surface could not be continued with isotropic tangent planes."""


class ResolutionError(ZollfreiError):
    """Sampling is too coarse to resolve the requested structure."""


class SolverError(ZollfreiError):
    """Newton iteration failed; ``residual`` holds the last residual."""

    def __init__(self, msg, residual=float("nan"), iterations=0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class ConditioningError(SolverError):
    """The Newton system is too ill-conditioned to trust."""


class TotallyRealViolation(ZollfreiError):
    """The boundary frame of a disk became complex-degenerate."""


class DegeneracyError(ZollfreiError):
    """A kernel or nullspace does not have the expected dimension."""


class CoverageError(ZollfreiError):
    """A search over a sampled family returned nothing."""


class HoleError(ZollfreiError):
    """A family grid has unsolved cells."""

    def __init__(self, msg, holes=()):
        super().__init__(msg)
        self.holes = list(holes)


class PoleError(ZollfreiError, ValueError):
    """Evaluation at (or too near) the quadric where the 3-form has a pole."""
