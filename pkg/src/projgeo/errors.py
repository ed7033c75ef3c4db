"""Exception hierarchy shared across the package."""


class ProjGeoError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficientError(ProjGeoError):
    """Chart Jacobian lost rank at the evaluation point."""


class DimensionMismatchError(ProjGeoError):
    """Operands live in incompatible spaces."""


class ChartDomainError(ProjGeoError):
    """Chart evaluated outside its closed parameter box."""


class ExprSyntaxError(ProjGeoError):
    """Malformed expression source; carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    """Identifier is neither a parameter y<i> nor a known function."""


class EvalDomainError(ProjGeoError):
    """Expression evaluated where it is undefined or non-differentiable."""


class SolverFailureError(ProjGeoError):
    """Too few multistart runs converged and the survivors disagree."""


class FootMismatchError(ProjGeoError):
    """Frontier predicate already fails arbitrarily close to the foot."""


class PredicateNoiseError(ProjGeoError):
    """Frontier predicate trace is not monotone; solver noise suspected."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


class FiberOverflowError(ProjGeoError):
    """Normal vector reaches past the frontier of its fiber."""


class NotC2Error(ProjGeoError):
    """Second chart derivatives are required but unavailable."""


class SingularResolventError(ProjGeoError):
    """1 is an eigenvalue of ||x-p(x)|| L: x sits at a center of curvature."""


class NonNormalOffsetError(ProjGeoError):
    """x - p(x) is not orthogonal to the tangent space at the foot."""


class FootJumpError(ProjGeoError):
    """A finite-difference probe left the projection basin."""


class BoundViolationError(ProjGeoError):
    """Computed operator norm exceeds its proven bound."""


class DegenerateHullError(ProjGeoError):
    """Samples are affinely dependent; no full-dimensional hull exists."""


class OutsideTubeError(ProjGeoError):
    """Point lies outside the tube radius required by the operation."""


class PreconditionError(ProjGeoError):
    """Documented precondition of an operation was violated."""


class ManifestError(ProjGeoError):
    """Manifold manifest is malformed."""
