class ExprError(ValueError):
    """Malformed expression input."""


class ExprSyntaxError(ExprError):
    """Expression source text that does not follow the grammar."""

    def __init__(self, message: str, offset: int) -> None:
        """Remember the byte offset at which parsing failed."""
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    """Identifier that is neither a coordinate, a parameter nor a function."""

    def __init__(self, name: str, offset: int) -> None:
        """Remember the identifier and where it occurred."""
        super().__init__(f"unknown identifier '{name}' at offset {offset}")
        self.name = name
        self.offset = offset


class ExprDomainError(ArithmeticError):
    """Evaluation left the real domain of a subexpression."""


class ChartError(ValueError):
    """Invalid metric chart or chart request."""


class TensorError(ValueError):
    """Invalid tensor operation."""


class PreconditionError(ValueError):
    """Operation input outside the documented preconditions."""


class QuadratureError(ValueError):
    """Chart or integrand that cannot be integrated."""


class ConvergenceError(RuntimeError):
    """Iterative solver that did not converge."""
