"""Exception hierarchy shared across the package."""


class EfnlmError(Exception):
    """Base class for all model/numerics errors raised by this package."""


class DimensionMismatch(EfnlmError):
    pass


class NotSymmetric(EfnlmError):
    pass


class NotPositiveDefinite(EfnlmError):
    pass


class NoConvergence(EfnlmError):
    pass


class DomainError(EfnlmError):
    pass


class RankDeficient(EfnlmError):
    pass


class DegenerateResiduals(EfnlmError):
    pass


class NonPositiveVariance(EfnlmError):
    pass


class DegenerateSample(EfnlmError):
    pass


class UnsupportedFamily(EfnlmError):
    pass


class ConfigError(EfnlmError):
    """Invalid simulation/CLI configuration (maps to exit code 2)."""


class ParseError(EfnlmError):
    """Malformed input file (maps to exit code 2)."""
