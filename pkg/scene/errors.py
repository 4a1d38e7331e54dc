"""
Module: errors
Exceptions raised by shape generation, scan simulation and LPC file I/O.
"""

__all__ = ('SceneError', 'SpecInfeasible', 'TooFewPoints', 'ParseError', 'InvariantViolation')


class SceneError(Exception):
    """Base class for scene failures."""


class SpecInfeasible(SceneError):
    """The requested primitive count could not be realized."""


class TooFewPoints(SceneError):
    """Fewer points survive the crop than the downsample target."""


class ParseError(SceneError):
    """
    Malformed LPC content.

    Attributes:
        line (int): 1-based line number of the offending line.
    """

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvariantViolation(SceneError):
    """
    Parsed content breaks a LabeledCloud invariant.

    Attributes:
        check (str): Name of the failed check.
    """

    def __init__(self, check: str, message: str):
        super().__init__(f"{check}: {message}")
        self.check = check
