"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 2 (click),
ConfigError/DomainError/UnsupportedError/FitError exit 3, InfeasibleError
exit 4.
"""


class StatprivError(Exception):
    """Base class for all library errors."""


class ConfigError(StatprivError):
    """Incompatible configuration, e.g. family mismatch or a secret the
    family cannot express."""


class DomainError(StatprivError):
    """Numeric input outside the valid domain, e.g. a parameter outside the
    prior box or a quantile level outside (0, 1)."""


class UnsupportedError(StatprivError):
    """A (family, secret, prior) combination with no implemented formula."""


class FitError(StatprivError):
    """Parameter estimation failed (empty or degenerate data)."""


class InfeasibleError(StatprivError):
    """No mechanism satisfies the requested budget ("no answer")."""
