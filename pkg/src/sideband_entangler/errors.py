"""Exception hierarchy shared by all modules."""


class SidebandError(Exception):
    """Base class for every error raised by the package."""


# linalg
class NotHermitian(SidebandError, ValueError):
    pass


class NoConvergence(SidebandError, RuntimeError):
    pass


class NotPSD(SidebandError, ValueError):
    pass


# hilbert
class IndexOutOfRange(SidebandError, IndexError):
    pass


class DimensionMismatch(SidebandError, ValueError):
    pass


class EmptyKeepSet(SidebandError, ValueError):
    pass


class UnknownSlot(SidebandError, KeyError):
    pass


# dynamics
class EdgeSupport(SidebandError, ValueError):
    pass


class OffResonance(SidebandError, ValueError):
    pass


class NormDrift(SidebandError, RuntimeError):
    pass


# entanglement
class NotXState(SidebandError, ValueError):
    pass


class WeightTooSmall(SidebandError, ValueError):
    pass


# protocol
class FitDegenerate(SidebandError, RuntimeError):
    pass


class NoInteriorMax(SidebandError, RuntimeError):
    pass


# cli
class ParseError(SidebandError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SidebandError, ValueError):
    pass
