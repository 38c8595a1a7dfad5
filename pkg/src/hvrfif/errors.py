"""Exception hierarchy.

Every error carries a ``code`` equal to its class name; the CLI prints it and
maps the class family to an exit status.
"""


class HvrfifError(Exception):
    @property
    def code(self):
        return type(self).__name__


class ValidationError(HvrfifError, ValueError):
    """Input or construction failure (CLI exit 1)."""


class TooFewPoints(ValidationError):
    pass


class NonIncreasingAbscissa(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class DomainCountOutOfRange(ValidationError):
    pass


class InvalidDomain(ValidationError):
    pass


class DomainTooNarrow(ValidationError):
    pass


class GammaOutOfRange(ValidationError):
    pass


class UnusedDomain(ValidationError):
    pass


class NonSquareDomain(ValidationError):
    pass


class DeadRegion(ValidationError):
    pass


class NotContractive(ValidationError):
    pass


class EndpointMismatch(ValidationError):
    pass


class HypothesisViolated(ValidationError):
    pass


class Reducible(ValidationError):
    pass


class DeltaTooSmall(ValidationError):
    pass


class ExprError(ValidationError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprError):
    pass


class UnknownFunction(ExprError):
    pass


class ExprDomainError(ExprError):
    pass


class NoConvergence(HvrfifError):
    """Iteration budget exhausted (CLI exit 2).

    ``partial`` holds whatever the solver had when it stopped.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
