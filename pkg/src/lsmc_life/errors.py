"""Exception hierarchy.

Every error carries the process exit code the command-line front end maps it to.
"""


class LsmcError(Exception):
    exit_code = 10


class ConfigError(LsmcError):
    exit_code = 2


class DataFileError(LsmcError):
    exit_code = 3


class AssumptionCoverageError(LsmcError):
    """A model point needs a mortality rate the table does not provide."""

    exit_code = 4

    def __init__(self, model_point, year, age):
        self.model_point = model_point
        self.year = year
        self.age = age
        super().__init__(
            f"no mortality rate for model point {model_point!r}: "
            f"attained age {age} in projection year {year}"
        )


class HorizonMismatchError(LsmcError):
    exit_code = 4


class InvalidRateError(LsmcError):
    exit_code = 4


class CalibrationError(LsmcError):
    exit_code = 5


class CollinearityError(LsmcError):
    exit_code = 6

    def __init__(self, columns, message=None):
        self.columns = list(columns)
        super().__init__(message or f"design matrix is rank deficient; offending columns: {self.columns}")


class LayoutMismatchError(LsmcError):
    exit_code = 6


class NestedBudgetExceeded(LsmcError):
    exit_code = 7

    def __init__(self, completed, total):
        self.completed = completed
        self.total = total
        super().__init__(f"nested simulation exceeded its time budget after {completed} of {total} outer paths")


EXIT_CODES = {
    0: "success",
    1: "invalid parameter value",
    ConfigError.exit_code: "configuration or command-line error",
    DataFileError.exit_code: "input file missing or malformed",
    AssumptionCoverageError.exit_code: "assumption coverage / horizon / rate validity error",
    CalibrationError.exit_code: "calibration anchors cannot be met",
    CollinearityError.exit_code: "regression failed (rank deficiency or layout mismatch)",
    NestedBudgetExceeded.exit_code: "nested simulation time budget exceeded",
    LsmcError.exit_code: "other model error",
}
