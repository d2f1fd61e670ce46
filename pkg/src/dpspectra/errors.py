"""Exception hierarchy shared by all modules."""


class DpSpectraError(Exception):
    """Base class for library errors."""


class DimensionError(DpSpectraError, ValueError):
    """Operand shapes do not agree."""


class ConvergenceError(DpSpectraError, ArithmeticError):
    """An iterative routine hit its iteration cap before converging."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateIterateError(DpSpectraError, ArithmeticError):
    """A power-iteration step produced a (numerically) zero vector."""


class PreconditionError(DpSpectraError, ValueError):
    """Inputs do not satisfy the hypotheses a check relies on."""


class OverflowRiskError(DpSpectraError, ArithmeticError):
    """A computation would leave the representable floating-point range."""


class ParseError(DpSpectraError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        where = f"{path or '<input>'}:{line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.path = path
