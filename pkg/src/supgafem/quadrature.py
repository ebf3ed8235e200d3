"""Quadrature rules on the reference triangle and the reference edge.

The reference triangle has vertices (0,0), (1,0), (0,1); reference edge is
[0,1].  Triangle rules are built by collapsing a tensor Gauss-Legendre grid
onto the triangle, which keeps all weights positive at every exactness
degree.  Weights sum to the reference measure (1/2 resp. 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

MAX_TRIANGLE_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    """Points (n,2) or (n,) in reference coordinates, weights (n,), exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Rule integrating all polynomials up to ``degree`` exactly on the reference triangle."""
    if degree < 0 or degree > MAX_TRIANGLE_DEGREE:
        raise ValueError(f"triangle quadrature degree must be in [0, {MAX_TRIANGLE_DEGREE}]")
    # Collapsed square: (s,t) -> (x,y) = (s, t*(1-s)) with Jacobian (1-s).
    # Monomial x^a y^b pulls back to s^a t^b (1-s)^(b+1); with a+b <= degree the
    # s-factor has degree <= degree+1, so n Gauss points need 2n-1 >= degree+1.
    n = (degree + 2) // 2 + 1
    s, ws = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    ss, tt = np.meshgrid(s, s, indexing="ij")
    wss, wtt = np.meshgrid(ws, ws, indexing="ij")
    x = ss.ravel()
    y = (tt * (1.0 - ss)).ravel()
    w = (wss * wtt * (1.0 - ss)).ravel()
    pts = np.column_stack([x, y])
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0,1] exact up to ``degree``."""
    if degree < 0:
        raise ValueError("edge quadrature degree must be >= 0")
    n = degree // 2 + 1
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(t, w, degree)


def triangle_monomial_integral(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)
