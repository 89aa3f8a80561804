"""Symmetric triangle quadrature, exact for bivariate degree <= 6.

The 12-point rule below is given in barycentric coordinates with
weights summing to one; an integral over a physical triangle T is
area(T) times the weighted sum of integrand values.  Degree 6 is what
the cubic element assembly needs: products of two cubic basis functions
(mass) have degree 6, products of their gradients (stiffness) degree 4.
"""

from __future__ import annotations

import numpy as np

RULE_DEGREE = 6

# three-point orbits (a, a, 1-2a) and one six-point orbit (a, b, 1-a-b)
_ORBIT3 = (
    (0.063089014491502, 0.050844906370207),
    (0.249286745170910, 0.116786275726379),
)
_ORBIT6 = ((0.310352451033785, 0.053145049844816, 0.082851075618374),)


def _build() -> tuple[np.ndarray, np.ndarray]:
    pts, wts = [], []
    for a, w in _ORBIT3:
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
        wts += [w] * 3
    for a, b, w in _ORBIT6:
        c = 1.0 - a - b
        pts += [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
        wts += [w] * 6
    return np.array(pts), np.array(wts)


_POINTS, _WEIGHTS = _build()


def triangle_rule() -> tuple[np.ndarray, np.ndarray]:
    """(points, weights): barycentric points (12, 3), weights (12,) summing to 1."""
    return _POINTS.copy(), _WEIGHTS.copy()
