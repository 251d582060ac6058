"""Exception types raised by ppmc."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ParseError(ValueError):
    """A trajectory file line could not be parsed."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class EmptyTrajectoryError(ValueError):
    """A trajectory file holds no data records."""


class SolverDivergenceError(ArithmeticError):
    """A solver iterate became non-finite or exceeded the magnitude guard."""

    def __init__(self, message, iteration):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
