"""Exception types raised across the package."""


class WaveFuseError(Exception):
    """Base class for all package errors."""


class DatasetError(WaveFuseError, ValueError):
    """Dataset failed validation (shape, label range, finiteness)."""


class CSVParseError(DatasetError):
    """A dataset CSV file could not be parsed."""


class StratificationError(WaveFuseError, ValueError):
    """Stratified sampling is infeasible for the requested sizes."""


class MissingClassError(StratificationError):
    """A class has no members in the index set being stratified."""


class SelectionError(WaveFuseError, ValueError):
    """A batch cannot be applied to the current pool."""


class StaleSelectionError(SelectionError):
    """A selected index is not in the unlabeled pool."""


class DuplicateSelectionError(SelectionError):
    """A batch contains the same index more than once."""


class BudgetError(WaveFuseError, ValueError):
    """Requested batch size is invalid for the candidate set."""


class ShapeError(WaveFuseError, ValueError):
    """Array shapes are incompatible."""


class DivergenceError(WaveFuseError, ArithmeticError):
    """Training loss became non-finite."""


class ConfigError(WaveFuseError, ValueError):
    """Invalid configuration value or key."""


class DegenerateWeightsError(WaveFuseError, ValueError):
    """Raw fusion weights are all zero."""


class DegenerateTestError(WaveFuseError, ValueError):
    """Paired differences have zero variance but nonzero mean."""


class SampleSizeError(WaveFuseError, ValueError):
    """Too few paired observations for a t-test."""


class AggregationError(WaveFuseError, ValueError):
    """Runs cannot be aggregated because their rounds do not line up."""


class ComparisonError(WaveFuseError, ValueError):
    """Two curve files cannot be compared."""
