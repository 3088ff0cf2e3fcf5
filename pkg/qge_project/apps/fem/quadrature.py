"""
Symmetric Gaussian rules on the reference triangle (0,0), (1,0), (0,1).

The rules are the Xiao-Gimbutas tables distributed with modepy, pulled back
from modepy's biunit triangle.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from modepy import QuadratureRuleUnavailable, XiaoGimbutasSimplexQuadrature

from .exceptions import InvalidArgument, UnsupportedDegree

logger = logging.getLogger(__name__)

MIN_DEGREE = 1
MAX_DEGREE = 20
REFERENCE_AREA = 0.5


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        """Apply the rule to samples taken at ``points`` (last axis)."""
        return np.asarray(values) @ self.weights


def reference_monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@lru_cache(maxsize=None)
def rule_for_degree(d):
    """Rule exact for every polynomial of total degree <= ``d``."""
    if not isinstance(d, (int, np.integer)) or not MIN_DEGREE <= d <= MAX_DEGREE:
        raise UnsupportedDegree(f"Quadrature degree must be an integer in [{MIN_DEGREE}, {MAX_DEGREE}], got {d!r}")
    try:
        biunit = XiaoGimbutasSimplexQuadrature(int(d), 2)
    except QuadratureRuleUnavailable as exc:
        raise UnsupportedDegree(str(exc)) from exc

    points = 0.5 * (np.asarray(biunit.nodes, dtype=float).T + 1.0)
    weights = 0.25 * np.asarray(biunit.weights, dtype=float)
    points.setflags(write=False)
    weights.setflags(write=False)
    rule = QuadratureRule(points=points, weights=weights, degree=int(d))
    check_exactness(rule)
    logger.debug("Quadrature rule of degree %d with %d points", d, len(rule))
    return rule


def check_exactness(rule, rtol=1e-13):
    """Raise InvalidArgument if some monomial of degree <= rule.degree is misintegrated."""
    x, y = rule.points.T
    if abs(rule.weights.sum() - REFERENCE_AREA) > 1e-14:
        raise InvalidArgument(f"Weights of the degree {rule.degree} rule sum to {rule.weights.sum()!r}")
    if np.any(rule.points < -1e-14) or np.any(rule.points.sum(axis=1) > 1.0 + 1e-14):
        raise InvalidArgument(f"The degree {rule.degree} rule has points outside the reference triangle")
    for total in range(rule.degree + 1):
        for a in range(total + 1):
            b = total - a
            exact = reference_monomial_integral(a, b)
            approx = rule.integrate(x**a * y**b)
            if abs(approx - exact) > rtol * exact:
                raise InvalidArgument(
                    f"Degree {rule.degree} rule integrates x^{a} y^{b} to {approx!r}, expected {exact!r}"
                )


def map_to_triangle(rule, vertices):
    """
    Affine image of ``rule`` on a physical triangle.

    Returns ``(points, weights)`` with weights scaled by twice the triangle area.
    """
    vertices = np.asarray(vertices, dtype=float)
    jac = np.column_stack([vertices[1] - vertices[0], vertices[2] - vertices[0]])
    det = float(np.linalg.det(jac))
    if det <= 0.0:
        raise InvalidArgument("Cannot map a quadrature rule to a degenerate or clockwise triangle")
    return vertices[0] + rule.points @ jac.T, rule.weights * det
