"""
Exception types raised across the simulator.

Every error derives from IciSimError so callers can catch the whole family;
configuration problems derive from ConfigError, which the CLI maps to exit code 2.
"""


class IciSimError(Exception):
    """Base class for all simulator errors."""
    pass


# ========== Numerics ==========

class NotHermitianError(IciSimError):
    """Raised when a matrix expected to be Hermitian is not."""
    pass


class NotPositiveDefiniteError(IciSimError):
    """Raised when a Cholesky pivot is non-positive or negligibly small."""
    pass


class SingularDiagonalError(IciSimError):
    """Raised when a triangular matrix has a (near) zero diagonal entry."""
    pass


class ZeroMatrixError(IciSimError):
    """Raised when a dominant singular triplet is requested for a zero matrix."""
    pass


class NoConvergenceError(IciSimError):
    """Raised when an iterative solver exceeds its iteration cap."""
    pass


class DimensionMismatchError(IciSimError):
    """Raised when operand shapes do not agree."""
    pass


# ========== Channel ==========

class NonPositiveDistanceError(IciSimError):
    """Raised when a propagation segment has zero or negative length."""
    pass


class DegenerateGeometryError(IciSimError):
    """Raised when a scatterer coincides with a link endpoint."""
    pass


class EmptyChannelListError(IciSimError):
    """Raised when an RSRP is requested over no subcarrier channels."""
    pass


# ========== Whitening ==========

class EmptySampleSetError(IciSimError):
    """Raised when a covariance or CSI-IM measure is requested over no samples."""
    pass


class InconsistentParamsError(IciSimError):
    """Raised when stored Bernstein constants disagree with their definitions."""
    pass


# ========== Detector ==========

class InconsistentDimensionsError(IciSimError):
    """Raised when channel estimates disagree in receive-antenna count."""
    pass


class ConstantDataError(IciSimError):
    """Raised when Z-score statistics would divide by a vanishing deviation."""
    pass


class NonFiniteLossError(IciSimError):
    """Raised when SVDD training diverges."""
    pass


class KOutOfRangeError(IciSimError):
    """Raised when k is outside [1, number of training points]."""
    pass


# ========== Scenario / metrics ==========

class IndexOutOfRangeError(IciSimError):
    """Raised when a position index falls outside the trajectory."""
    pass


class LengthMismatchError(IciSimError):
    """Raised when paired sequences differ in length."""
    pass


class EmptyInputError(IciSimError):
    """Raised when a metric is requested over no predictions."""
    pass


# ========== Configuration ==========

class ConfigError(IciSimError):
    """Base class for experiment configuration errors."""
    pass


class ParseError(ConfigError):
    """Raised for malformed configuration lines."""

    def __init__(self, message: str, line: int = None, key: str = None):
        self.line = line
        self.key = key
        context = []
        if line is not None:
            context.append(f"line {line}")
        if key is not None:
            context.append(f"key '{key}'")
        suffix = f" ({', '.join(context)})" if context else ""
        super().__init__(f"{message}{suffix}")


class UnknownKeyError(ParseError):
    """Raised when a configuration key is not part of the schema."""
    pass


class InvalidSpecError(ParseError):
    """Raised when a configuration value fails validation."""
    pass


class UnknownDetectorError(IciSimError):
    """Raised when a detector name is not in the registry."""
    pass
