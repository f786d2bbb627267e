"""Exception types raised by hyperfit."""


class HyperfitError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(HyperfitError, ValueError):
    """An argument violates a documented precondition."""


class NotAnEllipsoidError(HyperfitError):
    """A shape matrix is not positive definite within tolerance."""


class DegenerateSupportError(HyperfitError):
    """Posterior mass is too small to determine the model."""


class NumericFailureError(HyperfitError):
    """Non-finite intermediates or a monotonicity violation during EM.

    ``diagnostics`` carries whatever state was available when the failure
    was detected (for EM, the negative log-likelihood trace).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
