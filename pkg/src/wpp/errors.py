"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Raised when an array has the wrong rank or incompatible dimensions."""


class ParameterError(ValueError):
    """Raised when a scalar or config parameter is outside its valid range."""


class EvaluationError(RuntimeError):
    """Raised when a search objective evaluates to a non-finite value.

    Attributes:
        w: weight value (scalar or tuple) at which the evaluation failed.
    """

    def __init__(self, message, w=None):
        super().__init__(message)
        self.w = w


class ProtocolError(RuntimeError):
    """Raised when serialized data violates the tensor-file protocol."""
