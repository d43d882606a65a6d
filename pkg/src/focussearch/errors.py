"""Exception hierarchy.

Everything raised for bad data derives from :class:`DataError`; the CLI maps
those to exit code 2.
"""


class DataError(ValueError):
    """Input data cannot be processed."""


# image_model
class ZeroMeanImage(DataError):
    pass


class EmptyImage(DataError):
    pass


class NoUnsaturatedStar(DataError):
    pass


class DegenerateProfile(DataError):
    pass


class WindowOutOfBounds(DataError):
    pass


# focus_curve
class IndexOutOfRange(DataError, IndexError):
    pass


# search_algorithms
class IntervalTooSmall(DataError):
    pass


class DegenerateGeometry(DataError):
    pass


class NonPositiveFocusLevel(DataError):
    pass


# evaluation
class EmptyInput(DataError):
    pass


class MissingAlgorithm(DataError):
    pass


# sequence_io
class MalformedHeader(DataError):
    pass


class TruncatedData(DataError):
    pass


class UnsupportedMaxval(DataError):
    pass


class DuplicateIndex(DataError):
    pass


class NonUniformStep(DataError):
    pass


class MissingFrame(DataError):
    pass


class NonFiniteValue(DataError):
    pass
