"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid configuration.

    Parameters
    ----------
    errors : str or list of str
        One message per violated rule. All of them are kept so callers can
        report every problem at once.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class MisuseError(RuntimeError):
    """An object was used in a way its kind does not support."""


class ConsistencyError(RuntimeError):
    """An internal invariant was violated (indicates a kernel bug)."""


class TruncationError(RuntimeError):
    """A simulation exceeded its configured event cap."""


class IntegrationError(ArithmeticError):
    """Numerical quadrature failed to converge or diverged."""


class RunAborted(RuntimeError):
    """A wall-clock run was aborted, e.g. by a wedged worker."""
