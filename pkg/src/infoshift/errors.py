"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`InfoshiftError` so
callers can catch one base type at pipeline boundaries.  Validation failures
are split by what went wrong (shape, domain, precondition) because the CLI
maps them to different exit paths.
"""

from __future__ import annotations


class InfoshiftError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(InfoshiftError):
    """An array argument has the wrong shape, dtype, or symmetry."""


class DomainError(InfoshiftError):
    """A numeric argument is outside its valid domain (negative mass,
    non-normalized distribution, severity out of range, and so on)."""


class PreconditionError(InfoshiftError):
    """A documented hypothesis of a bound or check does not hold for the
    supplied inputs.  The message names the offending quantity."""


class ConvergenceError(InfoshiftError):
    """An iterative routine hit its iteration cap before reaching its
    convergence target.  Carries the achieved residual for diagnostics."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConfigError(InfoshiftError):
    """A run configuration file is malformed, has unknown keys, or holds
    values outside their documented ranges."""
