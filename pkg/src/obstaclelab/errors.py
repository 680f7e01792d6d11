"""Exception types raised by the lab."""


class LabError(Exception):
    """Base class for all validation and domain errors."""


class NonSymmetric(LabError):
    pass


class TraceViolation(LabError):
    pass


class NotPSD(LabError):
    pass


class IndexOutOfRange(LabError):
    pass


class PencilParamOutOfRange(LabError):
    pass


class DimensionMismatch(LabError):
    pass


class UnsupportedDimension(LabError):
    pass


class ResolutionTooLow(LabError):
    pass


class NonFiniteSample(LabError):
    pass


class OutOfDomain(LabError):
    pass


class ScaleOutOfDomain(OutOfDomain):
    pass


class GridTooSmall(LabError):
    pass


class NegativeBoundaryData(LabError):
    pass


class EmptyRadii(LabError):
    pass


class RankDeficient(LabError):
    pass


class ConfigError(LabError):
    """Bad or incomplete configuration / input file."""


class ScaleFloorReached(UserWarning):
    """Requested scales fell below the grid resolution floor; report truncated."""
