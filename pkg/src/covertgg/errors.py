"""Exception types raised across the package."""


class CovertError(Exception):
    """Base class for all package errors."""


class ParameterError(CovertError, ValueError):
    """An argument violates a documented precondition."""


class UnsupportedShapeError(ParameterError):
    """The requested shape parameter is outside what an operation supports."""


class QuadratureError(CovertError, ArithmeticError):
    """Numerical integration did not reach the requested accuracy."""


class DecompositionError(CovertError, ArithmeticError):
    """The characteristic-function deconvolution produced an invalid law."""


class TransportError(CovertError, ValueError):
    """A covariance or mixing matrix cannot define an invertible transport."""
