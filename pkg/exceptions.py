class AvgSampError(Exception):
    """Base class for every error raised by avgsamp."""


class InvalidKernel(AvgSampError, ValueError):
    """A kernel, sampling scheme or spectral measure violates its invariants."""


class NotRieszBasis(AvgSampError, ArithmeticError):
    """The generator spectrum vanishes on [-pi, pi]; no stable dual exists."""


class QuadratureNotConverged(AvgSampError, ArithmeticError):
    pass


class DerivativeOrderExceeded(AvgSampError, ValueError):
    pass


class NonRealKernel(AvgSampError, ArithmeticError):
    pass


class TabulationRangeExceeded(AvgSampError, IndexError):
    pass


class Diverged(AvgSampError, ArithmeticError):
    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history or [])


class ConfigError(AvgSampError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
