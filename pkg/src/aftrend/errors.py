"""Exception hierarchy.

Every analysis failure derives from :class:`AnalysisError`; the CLI maps it to
exit code 1.
"""


class AnalysisError(Exception):
    """Base class for data and estimation failures."""


# ingestion
class MissingColumn(AnalysisError):
    pass


class NonConsecutiveYears(AnalysisError):
    pass


class NonNumericCell(AnalysisError):
    pass


class LengthMismatch(AnalysisError):
    pass


class NonPositiveDenominator(AnalysisError):
    def __init__(self, index, value):
        super().__init__(f"denominator at index {index} is not positive ({value!r})")
        self.index = index


# tests and estimators
class TooFewObservations(AnalysisError):
    pass


class AllValuesTied(AnalysisError):
    pass


class InsufficientObservations(AnalysisError):
    pass


class RankDeficientDesign(AnalysisError):
    pass


class DegenerateBreakPlacement(AnalysisError):
    pass


class SeriesTooShortForTrim(AnalysisError):
    pass


class DegenerateSeries(AnalysisError):
    pass


class OptimizerFailed(AnalysisError):
    pass


class InvalidSpec(AnalysisError):
    pass
