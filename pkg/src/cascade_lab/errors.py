"""Exception hierarchy shared by every module."""


class CascadeLabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CascadeLabError, ValueError):
    """A physical or numerical parameter is outside its valid range."""


class PreconditionError(CascadeLabError, ValueError):
    """An input object does not satisfy the operation's precondition."""


class ConsistencyError(CascadeLabError, RuntimeError):
    """Two independently computed quantities disagree beyond tolerance."""


class ConvergenceError(CascadeLabError, ArithmeticError):
    """An iterative or refining numerical procedure failed to converge."""


class ConfigError(CascadeLabError, ValueError):
    """A run configuration could not be parsed or resolved."""
