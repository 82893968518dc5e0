"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric failures with 3.
"""


class ConfigurationError(ValueError):
    """A scenario or run configuration is inconsistent or incomplete."""


class CapacityError(ValueError):
    """A request would exceed a hard resource guard (e.g. explicit RVQ with B > 24)."""


class NumericsError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class DegeneratePoleError(NumericsError):
    """A partial-fraction expansion was requested at a merged pole (b == 1)."""


class RankError(NumericsError):
    """A direction matrix is numerically rank deficient."""
