"""Exception types shared across the package."""


class SubsetBenchError(Exception):
    """Base class for all package-specific errors."""


class ConstantColumnError(SubsetBenchError):
    """A design-matrix column has zero variance and cannot be standardized."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} is constant (zero variance)")


class DegenerateSignalError(SubsetBenchError):
    """The signal quadratic form is not strictly positive."""


class InvalidBlockPartitionError(SubsetBenchError):
    """Block covariance requested for a p not divisible by the block size."""


class FactorizationFailureError(SubsetBenchError):
    """Covariance matrix is numerically indefinite even after jitter."""


class ParseError(SubsetBenchError):
    """Malformed cell in an expression-matrix file."""

    def __init__(self, line: int, column: int, message: str = ""):
        self.line = line
        self.column = column
        detail = f": {message}" if message else ""
        super().__init__(f"parse error at line {line}, column {column}{detail}")


class MissingValueError(SubsetBenchError):
    """Expression matrix contains an empty cell; no imputation is done."""


class InsufficientColumnsError(SubsetBenchError):
    """Semi-synthetic generation needs at least 10 candidate columns."""


class InstanceTooLargeError(SubsetBenchError):
    """Exhaustive enumeration would exceed the subset-count guard."""


class ConfigError(SubsetBenchError):
    """Invalid experiment configuration; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ConvergenceWarning(UserWarning):
    """Coordinate descent hit the sweep limit before converging."""
