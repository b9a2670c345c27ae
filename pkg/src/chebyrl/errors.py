"""Exception hierarchy shared across the package."""


class ChebyrlError(Exception):
    """Base class for all package errors."""


class ConfigError(ChebyrlError):
    """Invalid configuration: bad parameter values, unknown config keys, malformed files."""


class DomainError(ChebyrlError):
    """Input outside the mathematical domain of an operation."""


class SearchError(ChebyrlError):
    """A bracketing / bisection / section search could not locate a solution."""


class DivergenceError(ChebyrlError):
    """Non-finite values encountered in model parameters or outputs."""
