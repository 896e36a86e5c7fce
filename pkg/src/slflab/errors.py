"""Exception types raised across the package."""


class SlfLabError(Exception):
    """Base class for all package errors."""


class SubcriticalityViolation(SlfLabError, ValueError):
    """Exponents (p, q) fail d/p + 2/q < 2, or sit on its boundary."""


class ParameterGateError(SlfLabError, ValueError):
    """Counterexample parameters fall outside the admissible (alpha, p, kappa) ranges."""


class SingularPoint(SlfLabError, ArithmeticError):
    """A field was evaluated exactly on its singular point."""


class MarginTooSmall(SlfLabError, ValueError):
    """The sampled box lacks the 1/n margin a level-n mollification needs."""


class CflViolation(SlfLabError, ValueError):
    """Time step too large for the explicit monotone scheme."""


class NonFiniteState(SlfLabError, FloatingPointError):
    """The grid solution stopped being finite."""


class GridMismatch(SlfLabError, ValueError):
    """Solutions being compared live on different grids or time stamps."""


class DegenerateFit(SlfLabError, ValueError):
    """Occupation estimates vanished, so a log-log slope is undefined."""


class ConfigInvalid(SlfLabError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))
