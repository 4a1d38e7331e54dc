"""
Module: errors
Exceptions raised by the model, its training loop and checkpoint I/O.
"""
from typing import Optional

__all__ = ('NetworkError', 'CacheMissing', 'NonFiniteLoss', 'CheckpointError')


class NetworkError(Exception):
    """Base class for model failures."""


class CacheMissing(NetworkError):
    """Backward was called on an output without its forward cache."""


class NonFiniteLoss(NetworkError):
    """
    A training step produced a NaN or infinite value; the step is aborted.

    Attributes:
        term (str): Loss term or gradient that diverged.
    """

    def __init__(self, term: str, message: Optional[str] = None):
        super().__init__(message or f"non-finite value in {term}")
        self.term = term


class CheckpointError(NetworkError):
    """Malformed or inconsistent checkpoint file."""
