"""
Module: errors
Exceptions raised by evaluation metrics.
"""

__all__ = ('MetricsError', 'EmptySet', 'NonUnitNormal', 'NoAxisPairs')


class MetricsError(Exception):
    """Base class for evaluation failures."""


class EmptySet(MetricsError):
    """A point set or matching that must be non-empty is empty."""


class NonUnitNormal(MetricsError):
    """A normal deviates from unit length by more than 1e-6."""


class NoAxisPairs(MetricsError):
    """No type-correct matched pair carries an axis."""
