"""Exception types shared across the package."""


class SpinLinkError(Exception):
    pass


class InvalidArgument(SpinLinkError, ValueError):
    pass


class UndefinedEstimate(SpinLinkError, ArithmeticError):
    """An estimator hit a zero denominator or an empty sample."""


class FitError(SpinLinkError, RuntimeError):
    pass


class ReconstructionError(SpinLinkError, RuntimeError):
    pass


class DataIntegrityError(SpinLinkError, ValueError):
    pass


class ConfigError(SpinLinkError, ValueError):
    pass


class ReportError(SpinLinkError, ValueError):
    pass
