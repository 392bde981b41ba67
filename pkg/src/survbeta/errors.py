"""Exception types shared across the library and the CLI."""


class SurvBetaError(Exception):
    """Base class for all library errors."""


class InvalidInputError(SurvBetaError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateDataError(SurvBetaError, ValueError):
    """The data is structurally unusable (e.g. no comparable pairs)."""


class ConfigError(SurvBetaError, ValueError):
    """An experiment or fit configuration is invalid."""


class SchemaError(SurvBetaError, ValueError):
    """A CSV file does not match the declared schema."""


class RowParseError(SurvBetaError, ValueError):
    """A CSV row holds an unparseable cell; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class DegenerateSplitError(SurvBetaError, ValueError):
    """A requested split leaves a nonzero-fraction part empty."""


class SolverFailure(SurvBetaError, RuntimeError):
    """The optimizer stopped before certifying optimality.

    Carries the best feasible point found so far, if any.
    """

    def __init__(self, message: str, best_x=None, best_objective=None):
        super().__init__(message)
        self.best_x = best_x
        self.best_objective = best_objective
