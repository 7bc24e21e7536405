"""Exception hierarchy shared by the solver, the problem parser and the sweep harness."""


class StrnError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteEvaluation(StrnError, ArithmeticError):
    """A residual, Jacobian or expression evaluation produced NaN or an infinity."""


class ScalingFailure(StrnError):
    """The affine scaling matrix cannot be formed (iterate numerically on a bound)."""


class SingularJacobian(StrnError):
    """LU factorization of the Jacobian detected rank deficiency."""


class DegenerateModel(StrnError):
    """The quadratic model is flat along the scaled gradient although the gradient is nonzero."""


class ZeroCauchyDecrease(StrnError):
    """The Cauchy step does not decrease the model."""


class NonPositivePredictedDecrease(StrnError):
    """The trial step does not decrease the model, so the agreement ratio is undefined."""


class InvalidParameters(StrnError, ValueError):
    pass


class InvalidStartingPoint(StrnError, ValueError):
    pass


class UnknownProblem(StrnError, LookupError):
    def __init__(self, name, near_matches=()):
        self.name = name
        self.near_matches = list(near_matches)
        msg = f"unknown problem {name!r}"
        if self.near_matches:
            msg += f"; did you mean: {', '.join(self.near_matches)}"
        super().__init__(msg)


class InvalidSweep(StrnError, ValueError):
    pass


class MixedSweep(StrnError, ValueError):
    pass


class DSLError(StrnError):
    """A problem-file or expression error carrying a 1-based source location."""

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)


class ExpressionSyntaxError(DSLError):
    pass


class UnknownIdentifier(DSLError):
    pass


class VariableIndexOutOfRange(DSLError):
    pass


class FormatError(DSLError):
    pass
