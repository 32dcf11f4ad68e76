"""Exception types raised by the valuation engine."""


class TricdsError(Exception):
    """Base class for all library errors."""


# --- market data ---------------------------------------------------------


class EmptyCurve(TricdsError, ValueError):
    """Curve construction needs at least two points."""


class NonMonotoneTerms(TricdsError, ValueError):
    """Curve terms must be strictly increasing."""


class OutOfRangeTerm(TricdsError, ValueError):
    """Query outside the curve's term range with extrapolation disabled."""


class WrongCurveKind(TricdsError, ValueError):
    """Operation applied to a curve of the wrong kind."""


class ParseError(TricdsError, ValueError):
    """Malformed market data file; carries line/field diagnostics."""

    def __init__(self, message, line=None, field=None):
        detail = message
        if line is not None:
            detail += f" (line {line})"
        if field is not None:
            detail += f" (field {field!r})"
        super().__init__(detail)
        self.line = line
        self.field = field


class SchemaError(TricdsError, ValueError):
    """Market data file is structurally valid but incomplete."""


# --- joint default distribution ------------------------------------------


class OutOfRange(TricdsError, ValueError):
    """Probability or dependence parameter outside its legal interval."""


class AdmissibilityError(TricdsError, ValueError):
    """Requested moments imply joint probabilities outside [0, 1].

    ``violations`` lists (cell_label, value) pairs for the offending cells.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class DegenerateSeries(TricdsError, ValueError):
    """A sample series is constant, so a scaling moment vanishes."""


class DimensionMismatch(TricdsError, ValueError):
    """Moment vector length does not match the number of variables."""


# --- hazard dynamics and calibration --------------------------------------


class InvalidParams(TricdsError, ValueError):
    """Mean-reversion parameters violate their sign constraints."""


class GridMismatch(TricdsError, ValueError):
    """Path time grid does not line up with the contract schedule."""


class NoRoot(TricdsError, ValueError):
    """Breakeven equation has no solution for the given inputs."""


class CalibrationFailed(TricdsError, RuntimeError):
    """Least-squares fit did not reach an acceptable objective."""

    def __init__(self, message, objective=None):
        super().__init__(message)
        self.objective = objective


class InvalidBounds(TricdsError, ValueError):
    """Calibration box constraints are empty or inverted."""


# --- pricing ---------------------------------------------------------------


class RegressionSingular(TricdsError, ValueError):
    """Continuation regression is underdetermined."""


class NoBracket(TricdsError, ValueError):
    """Root bracketing for the breakeven spread failed."""
