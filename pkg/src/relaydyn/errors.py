"""Exception hierarchy shared across the package.

Numerical failures (an algorithm did not reach its tolerance) and validation
failures (a documented precondition or invariant was violated) are kept in
separate branches so callers, and the command line driver in particular, can
map them to distinct exit codes.
"""

from __future__ import annotations

__all__ = [
    "RelayDynError",
    "NumericalError",
    "ValidationError",
    "IntegrationFailure",
    "NoRootInBracket",
    "DegenerateDerivative",
    "NoConvergence",
    "SingularJacobian",
    "InitialPointFailed",
    "DegenerateCrossing",
    "WindowTooLarge",
    "SingularSurface",
    "NegativeEpsilon",
    "NoRootInInterval",
    "ParametrizationBreakdown",
    "NotAMaximum",
    "BreakupDetected",
    "LeftNeighborhood",
    "CentroidOnCurve",
    "InsufficientSamples",
]


class RelayDynError(Exception):
    """Base class for all package-specific errors."""


class NumericalError(RelayDynError):
    """An iterative or adaptive method failed to meet its tolerance."""


class ValidationError(RelayDynError):
    """A documented precondition or model invariant was violated."""


# --- numerical failures -------------------------------------------------

class IntegrationFailure(NumericalError):
    """The generic ODE backend did not complete a requested integration."""


class NoRootInBracket(NumericalError):
    """Crossing-time solve found no root inside the admissible bracket."""


class DegenerateDerivative(NumericalError):
    """Newton derivative vanished and the bisection fallback has no bracket."""


class NoConvergence(NumericalError):
    """Newton iteration exceeded its iteration budget."""


class SingularJacobian(NumericalError):
    """Jacobian in a Newton or continuation step is numerically singular."""


class InitialPointFailed(NumericalError):
    """Branch continuation could not converge its very first point."""


# --- validation failures ------------------------------------------------

class DegenerateCrossing(ValidationError):
    """Switching signal is tangent (derivative below tolerance) at a crossing."""


class WindowTooLarge(ValidationError):
    """Requested inspection window overlaps a neighbouring crossing."""


class SingularSurface(ValidationError):
    """Half-period map matrix is numerically singular at this delay."""


class NegativeEpsilon(ValidationError):
    """Parameter point maps to a non-positive switching threshold."""


class NoRootInInterval(ValidationError):
    """Scalar solve over a parameter interval found no sign change."""


class ParametrizationBreakdown(ValidationError):
    """Radial curve parametrization failed (zero radius or non-monotone angle)."""


class NotAMaximum(ValidationError):
    """Stationary point of the crossing-time function is not a maximum."""


class BreakupDetected(ValidationError):
    """Invariant-curve error estimate exceeded the break-up threshold."""


class LeftNeighborhood(ValidationError):
    """Iteration left the validity neighbourhood of the return map."""


class CentroidOnCurve(ValidationError):
    """Sample centroid lies on the curve; angles are ill-defined."""


class InsufficientSamples(ValidationError):
    """Too few distinct samples to run the requested analysis."""
