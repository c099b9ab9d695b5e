from typing import Optional


class NomaError(Exception):
    """Base class for every error raised by the detection toolkit"""


class DimensionError(NomaError, ValueError):
    """Raised when array shapes or dimension parameters do not agree"""


class DimensionConflictError(DimensionError):
    """Raised when stored detector parameters do not fit a dataset"""


class IllConditionedError(NomaError, ValueError):
    """
    Raised when a least-squares design matrix is rank deficient

    Attributes:
        gram_condition: Condition estimate of the Gram matrix X̄ᵀX̄
    """

    def __init__(self, message: str, gram_condition: Optional[float] = None):
        super().__init__(message)
        self.gram_condition = gram_condition


class ConfigError(NomaError, ValueError):
    """Raised for invalid or unknown configuration values"""


class DatasetFormatError(NomaError, ValueError):
    """Raised when a dataset file has a bad magic, version or length"""


class DatasetTruncatedError(DatasetFormatError):
    """Raised when a dataset file is shorter than its header promises"""


class EquivalenceError(NomaError):
    """Raised when an optimized inference path disagrees with the reference"""
