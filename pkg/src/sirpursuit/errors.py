"""Exception hierarchy shared by every module."""


class SirPursuitError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SirPursuitError, ValueError):
    """Invalid model parameters or array shapes."""


class IntegrationError(SirPursuitError, ArithmeticError):
    """The ODE integration left the physically admissible region."""


class CacheError(SirPursuitError):
    """A dictionary cache is unreadable, corrupt, or was built with other settings."""


class ConfigurationError(SirPursuitError, ValueError):
    """Bad configuration value or unusable setup (e.g. empty dictionary)."""


class DataError(SirPursuitError, ValueError):
    """Malformed or inconsistent input data."""


class UndefinedStatisticError(SirPursuitError, ValueError):
    """A statistic is undefined for the given input (e.g. constant series)."""


class MatchingError(SirPursuitError):
    """No component/reference pair has a defined correlation."""


class RegressionError(SirPursuitError):
    """The regression design is singular or too small."""
