"""Exception hierarchy shared across the package.

The split mirrors the CLI exit codes: configuration and domain problems
(``ValidationError``, exit 1) versus failures of the numerics themselves
(``NumericsError``, exit 2).  Statistical-test failures are not exceptions;
they are carried as ``passed`` flags on report objects.
"""


class FppError(Exception):
    """Base class for errors raised by fpp_lab."""


class ValidationError(FppError):
    """Invalid configuration, argument out of domain, or violated precondition."""


class NumericsError(FppError):
    """Quadrature non-convergence, singular systems, degenerate weights, etc."""
