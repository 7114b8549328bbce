# utils/errors.py
"""
Domain errors raised across the toolkit. All of them are ValueErrors except
UnsupportedOperationError, so callers that only care about bad input can catch
ValueError.
"""
from typing import Optional


class IngestionError(ValueError):
    """A data cell could not be read as a finite number."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(ValueError):
    """The file or array does not have the expected layout (e.g. non-binary labels)."""


class SingularMatrixError(ValueError):
    """A covariance matrix that must be inverted is singular."""


class DegenerateDataError(ValueError):
    """The data make a quantity undefined (zero bandwidth, one class only, ...)."""


class ConditionViolatedError(ValueError):
    """A precondition of a closed-form result does not hold."""


class RefitError(ValueError):
    """Refitting an estimator on permuted or split labels failed."""

    def __init__(self, message: str, replicate: Optional[int] = None):
        super().__init__(message)
        self.replicate = replicate


class EmbeddingError(ValueError):
    """The eigendecomposition behind the diffusion map failed."""


class UnsupportedOperationError(TypeError):
    """The operation is not defined for this estimator kind."""
