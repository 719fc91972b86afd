"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`XplainError`. The three
intermediate classes map onto CLI exit codes: usage problems (2), bad input
data (3) and algorithm failures (4).
"""


class XplainError(Exception):
    exit_code = 4


class UsageError(XplainError, ValueError):
    exit_code = 2


class DataError(XplainError, ValueError):
    exit_code = 3


class AlgorithmError(XplainError, RuntimeError):
    exit_code = 4


# -- usage ------------------------------------------------------------------

class Unimplemented(UsageError):
    """The explainer kind is cataloged but has no implementation."""


class SchemaViolation(UsageError):
    def __init__(self, path, message=""):
        self.path = path
        super().__init__(f"{path}: {message}" if message else path)


# -- data -------------------------------------------------------------------

class MissingValue(DataError):
    def __init__(self, row, col):
        self.row, self.col = row, col
        super().__init__(f"missing value at row {row}, column {col!r}")


class UnknownColumn(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown column {name!r}")


class ParseFailure(DataError):
    def __init__(self, row, col, detail=""):
        self.row, self.col = row, col
        msg = f"cannot parse row {row}, column {col!r}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class EmptyDataset(DataError):
    pass


class NoLabels(DataError):
    pass


class NoSplittableFeature(DataError):
    pass


class NotBinaryLabels(DataError):
    pass


class EmptyCatalog(DataError):
    pass


class EmptyCandidates(DataError):
    pass


class LinkMismatch(DataError):
    pass


class RangeViolation(DataError):
    pass


class TooFewSamples(UsageError):
    pass


class DimensionTooLargeForExact(UsageError):
    pass


class BadArchitecture(UsageError):
    pass


class BadBandwidth(UsageError):
    pass


# -- algorithm --------------------------------------------------------------

class AllWeightsZero(AlgorithmError):
    pass


class GradientUnavailable(AlgorithmError):
    pass


class NoLayers(AlgorithmError):
    pass


class NoPNFound(AlgorithmError):
    pass


class NoPPFound(AlgorithmError):
    pass


class DegenerateVariance(AlgorithmError):
    pass
