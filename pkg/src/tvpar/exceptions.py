"""Exception and warning classes raised by tvpar."""


class TvparError(Exception):
    """Base class for all tvpar errors."""


class ConfigError(TvparError, ValueError):
    """A run configuration is malformed or inconsistent."""


class DataError(TvparError, ValueError):
    """Input data violates a precondition (non-finite values, bad lengths)."""


class TauOutOfRange(DataError):
    pass


class WindowTooSmall(DataError):
    pass


class LengthMismatch(DataError):
    pass


class NonpositiveInput(DataError):
    pass


class NonpositiveCpi(NonpositiveInput):
    pass


class TooFewResiduals(DataError):
    pass


class ZeroVarianceResiduals(TooFewResiduals):
    """Residuals have zero variance so autocorrelations are undefined."""


class NumericalError(TvparError, ArithmeticError):
    """A statistic cannot be computed on the given data."""


class SingularDesign(NumericalError):
    pass


class DegenerateRegressor(SingularDesign):
    """The lagged regressor is constant within the estimation window."""


class ZeroStandardError(NumericalError):
    pass


class NonpositiveLambda(NumericalError):
    """The long-run scale ``1 - sum(beta)`` is not positive."""


class RhoAboveOne(DataError):
    pass


class EmptyAcceptanceSet(NumericalError):
    """No candidate value on the grid is accepted by the test."""


class InvalidGrid(DataError):
    pass


class AlphaNotInTable(TvparError, KeyError):
    pass


class GridClampedWarning(UserWarning):
    """Bandwidth candidates above the sample size were collapsed to the full sample."""


class ExplosiveInitialization(UserWarning):
    """Average AR coefficient too close to one for a stationary start-up."""
