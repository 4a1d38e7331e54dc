"""
Module: errors
Exceptions raised while turning network outputs into exported primitives.
"""

__all__ = ('InferenceError', 'ExportError')


class InferenceError(Exception):
    """Base class for inference failures."""


class ExportError(InferenceError):
    """The primitive export file could not be written, read or validated."""
