"""Exception hierarchy shared by all modules."""


class ConnProbError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ConnProbError):
    """Invalid user configuration (scenario file, CLI flags)."""


class NumericError(ConnProbError):
    """Base class for numerical failures."""


class NotSymmetric(NumericError):
    pass


class NotPositiveDefinite(NumericError):
    pass


class SeriesOverflow(NumericError):
    """Series magnitudes exceed what the active arithmetic can represent."""


class DegreeCapExceeded(NumericError):
    pass


class CannotShrink(NumericError):
    """Inverse rescaling would push an eigenvalue to 1/2 or below."""


class SingularInnovation(NumericError):
    pass


class EmptyInput(ConnProbError):
    pass
