"""Quadrature rules on the reference triangle and the unit interval."""
from dataclasses import dataclass

import numpy as np

_A = (6.0 - np.sqrt(15.0)) / 21.0
_B = (6.0 + np.sqrt(15.0)) / 21.0
_WA = (155.0 - np.sqrt(15.0)) / 2400.0
_WB = (155.0 + np.sqrt(15.0)) / 2400.0

# Dunavant degree-5 rule, reference triangle (0,0), (1,0), (0,1).
DUNAVANT7_POINTS = np.array([
    [1.0 / 3.0, 1.0 / 3.0],
    [_A, _A],
    [1.0 - 2.0 * _A, _A],
    [_A, 1.0 - 2.0 * _A],
    [_B, _B],
    [1.0 - 2.0 * _B, _B],
    [_B, 1.0 - 2.0 * _B],
])
DUNAVANT7_WEIGHTS = np.array([9.0 / 80.0, _WA, _WA, _WA, _WB, _WB, _WB])


@dataclass(frozen=True)
class QuadratureRule:
    """Triangle rule plus the adaptive-subdivision controls used for the weight.

    ``weights`` sum to the reference-triangle area 1/2. ``max_depth`` and
    ``rel_tol`` govern the recursive quadrisection applied to the integral
    of the diffusion coefficient over each element.
    """

    points: np.ndarray = DUNAVANT7_POINTS
    weights: np.ndarray = DUNAVANT7_WEIGHTS
    max_depth: int = 12
    rel_tol: float = 1e-10

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(self.weights.sum() - 0.5) > 1e-14:
            raise ValueError("weights must sum to the reference area 1/2")
        if self.max_depth < 0 or self.rel_tol <= 0:
            raise ValueError("invalid adaptivity parameters")

    @property
    def barycentric(self):
        """Shape-function values, shape (npoints, 3)."""
        xi, eta = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - xi - eta, xi, eta])


DEFAULT_RULE = QuadratureRule()

# 8-point Gauss-Legendre on [0, 1]; used for the collapsed (Duffy) coordinate.
_gl_x, _gl_w = np.polynomial.legendre.leggauss(8)
GL8_NODES = 0.5 * (_gl_x + 1.0)
GL8_WEIGHTS = 0.5 * _gl_w
