"""Exception hierarchy shared by every module of the package."""


class LagEdgeError(Exception):
    """Base class for all errors raised by lagedge."""


class DataError(LagEdgeError, ValueError):
    """Input data is invalid or inconsistent (CLI exit code 2)."""


class OutOfDomain(DataError):
    pass


class OutOfTimeRange(DataError):
    pass


class UnknownAttribute(DataError):
    pass


class InvalidConfig(DataError):
    pass


class EmptyTrajectory(DataError):
    pass


class DegenerateNeighborhood(DataError):
    pass


class FieldTooSmall(DataError):
    pass


class EmptySet(DataError):
    pass


class MalformedHeader(DataError):
    pass


class SizeMismatch(DataError):
    pass


class MalformedRow(DataError):
    pass


class DegenerateRange(DataError):
    pass


class IoFailure(LagEdgeError, OSError):
    pass
