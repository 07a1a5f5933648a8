"""Exception types shared across the package."""


class QuadcutError(Exception):
    """Base class for all package errors."""


class ExpressionError(QuadcutError):
    """Malformed level-set expression; carries line/column info in the message."""


class NonFiniteEvaluation(QuadcutError):
    """A scalar field evaluated to NaN/inf (e.g. a rational level set at a pole)."""


class CapabilityMissing(QuadcutError):
    """An operation needs derivatives the object cannot provide."""


class InterpolationFailure(QuadcutError):
    """Bezier interpolation received non-finite samples."""


class AxisInactive(QuadcutError):
    """A face was requested along an axis the body does not extend in."""


class StructuralInvariantViolation(QuadcutError):
    """A nested-body tree violated a structural precondition."""


class DirectionUndetermined(QuadcutError):
    """All candidate height directions have vanishing mean gradient."""


class BracketInvalid(QuadcutError):
    """Root bracket endpoints have the same sign and neither is a root."""


class NewtonDiverged(QuadcutError):
    """Safeguarded Newton failed to converge within the iteration cap."""


class DerivativeSingular(QuadcutError):
    """An implicit height derivative hit a vanishing directional gradient."""


class NotTessellated(QuadcutError):
    """A mapping was requested from a nested body with undetermined signs."""


class OrderUnsupported(QuadcutError):
    """Requested Gauss order outside the supported range."""


class NonFiniteIntegrand(QuadcutError):
    """The integrand is non-finite at a quadrature node."""

    def __init__(self, message, node=None, provenance=None):
        super().__init__(message)
        self.node = node
        self.provenance = provenance
