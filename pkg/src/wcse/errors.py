"""Exception types shared across the package.

Two families matter for the CLI exit codes: configuration/validation
problems (exit 1) and numeric failures discovered while computing
(exit 2). Keep new exceptions in one of the two tuples below.
"""


class WcseError(Exception):
    """Base class for all package errors."""


class ShapeError(WcseError):
    """Operands have incompatible dimensions."""


class ConfigError(WcseError):
    """Invalid configuration value or malformed config file."""


class InsufficientDataError(WcseError):
    """Too few rows/pairs/points for the requested statistic."""


class FileFormatError(WcseError):
    """Unreadable or malformed binary file (bad magic, truncated payload)."""


class CheckpointError(WcseError):
    """Checkpoint cannot be loaded (bad magic, incompatible version)."""


class DegenerateInputError(WcseError):
    """Input violates a numeric precondition (zero vector, non-unit norm,
    constant series)."""


class ConvergenceError(WcseError):
    """Iterative eigensolver failed to converge within its sweep budget."""

    def __init__(self, message: str, off_diagonal: float):
        super().__init__(message)
        self.off_diagonal = off_diagonal


class SingularCovarianceError(WcseError):
    """Covariance (plus ridge) has an eigenvalue below the invertibility
    floor."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NumericError(WcseError):
    """A computed quantity became non-finite (training blow-up)."""


# CLI exit-code classification.
VALIDATION_ERRORS = (
    ShapeError,
    ConfigError,
    InsufficientDataError,
    FileFormatError,
    CheckpointError,
)
NUMERIC_ERRORS = (
    DegenerateInputError,
    ConvergenceError,
    SingularCovarianceError,
    NumericError,
)
