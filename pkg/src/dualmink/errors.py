"""Exception hierarchy shared across the package.

Errors are raised eagerly and carry enough context (node index, file path,
field name) for a caller to act; nothing is silently regularized.
"""


class DualMinkError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DualMinkError):
    """Invalid configuration value or argument (bad level, bad range, ...)."""


class UnsupportedRegimeError(ConfigurationError):
    """Parameters outside the supported (p, q) regime without the explicit flag."""


class InvalidBodyError(DualMinkError):
    """A convex-body invariant is violated (origin not interior, non-convex data, ...)."""


class NumericalError(DualMinkError):
    """A numerical procedure failed (rank-deficient fit, optimizer non-convergence)."""


class DegeneracyError(NumericalError):
    """Convexity loss or a nonpositive density where positivity is required."""


class AmbiguityError(DualMinkError):
    """Query direction sits on a normal-cone boundary; caller should perturb it."""
