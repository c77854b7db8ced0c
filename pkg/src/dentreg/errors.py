"""Exception hierarchy shared by every dentreg module."""


class DentregError(Exception):
    """Base class for all errors raised by this package."""


class DataError(DentregError):
    """Input data is malformed or unusable (CLI exit code 2)."""


class BehindCamera(DentregError):
    """A 3D point projects at or behind the near plane."""


class ParseError(DataError):
    pass


class EmptyMesh(DataError):
    pass


class TooFewPairs(DataError):
    pass


class Degenerate(DataError):
    """All 3D landmark positions are collinear (or coincident)."""


class DimensionMismatch(DataError):
    pass


class UnusableCase(DataError):
    """The region of interest is empty once the occlusion mask is removed."""


class InvalidConfig(DentregError):
    pass


class FitnessError(DentregError):
    """Wraps an exception raised by a fitness function, keeping the point."""

    def __init__(self, point, original):
        super().__init__(f"fitness failed at {list(point)!r}: {original!r}")
        self.point = point
        self.original = original


class MissingScores(DataError):
    pass


class EmptyInput(DataError):
    pass


class PositionOutOfRange(DataError):
    pass


class ManifestError(DataError):
    def __init__(self, message, case_id=None):
        super().__init__(message if case_id is None else f"{case_id}: {message}")
        self.case_id = case_id


class NonpositiveBandwidth(DataError):
    pass


class UnfittedModel(DentregError):
    pass


class EmptyPopulation(DataError):
    pass


class NonpositiveLR(DataError):
    pass


class InFrameExhausted(DentregError):
    pass


class MissingParams(DataError):
    pass
