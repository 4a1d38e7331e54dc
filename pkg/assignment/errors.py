"""
Module: errors
Exceptions raised by matching and loss computation.
"""
from typing import Optional

__all__ = ('AssignmentError', 'NonFinite')


class AssignmentError(Exception):
    """Base class for matching failures."""


class NonFinite(AssignmentError):
    """
    A cost entry or loss term is NaN or infinite.

    Attributes:
        term (Optional[str]): Name of the diverged loss term, if known.
    """

    def __init__(self, message: str, term: Optional[str] = None):
        super().__init__(message)
        self.term = term
