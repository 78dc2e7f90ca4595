"""Exception hierarchy shared by all modules."""


class PhiBVPError(Exception):
    """Base class for every error raised by the library."""


class ConfigurationError(PhiBVPError, ValueError):
    """A parameter is outside its admissible range."""


class DomainError(PhiBVPError, ValueError):
    """A point or interval lies outside the problem domain."""


class OrderingError(PhiBVPError, ValueError):
    """Two functions that must be ordered (lower <= upper) are not."""


class MeshMismatchError(PhiBVPError, ValueError):
    """Two grid functions do not live on compatible meshes."""


class IntegrandDomainError(PhiBVPError, ArithmeticError):
    """An integrand produced a non-finite value at an interior sample."""

    def __init__(self, message, abscissa):
        super().__init__(message)
        self.abscissa = abscissa


class BracketError(PhiBVPError, ArithmeticError):
    """A monotone root search could not bracket its root."""


class DivergenceError(PhiBVPError, ArithmeticError):
    """The integral of 1/psi failed to exceed the required level."""


class ExprError(PhiBVPError):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError, ValueError):
    """Malformed expression source; ``position`` is a 0-based offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class ExprDomainError(ExprError, ArithmeticError):
    """A math-domain violation during evaluation."""

    def __init__(self, message, subexpression):
        super().__init__(f"{message} in '{subexpression}'")
        self.subexpression = subexpression


class SpecFileError(PhiBVPError, ValueError):
    """A problem-spec document is malformed; ``line`` and ``column`` are 1-based."""

    def __init__(self, message, source="<spec>", line=None, column=None):
        where = source if line is None else f"{source}:{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line
        self.column = column
