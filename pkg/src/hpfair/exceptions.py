"""Exception hierarchy shared by every module."""


class HPFairError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HPFairError):
    """Bad user-supplied configuration (schema, space file, campaign)."""


class SchemaError(ConfigurationError):
    pass


class LabelError(ConfigurationError):
    pass


class ParseError(ConfigurationError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SpaceValidationError(ConfigurationError):
    def __init__(self, message, param=None):
        super().__init__(message)
        self.param = param


class DegenerateDataError(HPFairError):
    """Input data cannot support the requested computation."""


class SizeError(DegenerateDataError):
    pass


class StratificationError(DegenerateDataError):
    pass


class DegenerateGeometryError(DegenerateDataError):
    pass


class UndefinedMetricError(DegenerateDataError):
    pass


class ShapeError(HPFairError, ValueError):
    pass


class InvalidCombinationError(HPFairError, ValueError):
    """Hyperparameter values that the learner refuses to train with."""


class MutationImpossibleError(HPFairError):
    pass


class SearchStateError(HPFairError):
    pass


class SetupError(HPFairError):
    """The default configuration could not be evaluated."""
