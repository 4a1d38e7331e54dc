"""
Module: errors
Exception hierarchy for quadric algebra, fitting, sampling and projection.
"""
import numpy as np

__all__ = ('GeometryError', 'AllZero', 'DegenerateGradient', 'NoAxis', 'Underdetermined',
           'RankDeficient', 'EmptyIntersection', 'NoConvergence', 'InvalidPrimitive')


class GeometryError(Exception):
    """Base class for geometry failures."""


class AllZero(GeometryError):
    """Every coefficient is numerically zero."""


class DegenerateGradient(GeometryError):
    """
    The quadric gradient vanishes at the query point (e.g. a cone apex).

    Attributes:
        fallback (float): sqrt(|xᵀAx|), the distance callers use instead.
    """

    def __init__(self, fallback: float):
        super().__init__(f"gradient vanishes; fallback distance {fallback:.3g}")
        self.fallback = fallback


class NoAxis(GeometryError):
    """Spheres and null quadrics carry no axis."""


class Underdetermined(GeometryError):
    """Too few points for the requested fit."""


class RankDeficient(UserWarning):
    """The fit's null space has dimension > 1; an arbitrary minimizer was returned."""


class EmptyIntersection(GeometryError):
    """No part of the surface lies inside the sampling extent."""


class NoConvergence(GeometryError):
    """
    Foot-point iteration did not reach the surface.

    Attributes:
        best (np.ndarray): The best iterate found.
        residual (float): |xᵀAx| at ``best``.
    """

    def __init__(self, best: np.ndarray, residual: float):
        super().__init__(f"projection did not converge (residual {residual:.3g})")
        self.best = best
        self.residual = residual


class InvalidPrimitive(GeometryError):
    """A quadric violates the invariants of its type tag."""
