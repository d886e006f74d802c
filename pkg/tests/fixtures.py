"""Reference elements shared by the test modules."""

from fractions import Fraction

import numpy as np

from jacguard.elements import CLASSES
from jacguard.jacobian import ElementSpec

TRIANGLE = CLASSES["triangle"]


def collapsing_triangle(ident: str = "collapse") -> ElementSpec:
    """Linear triangle whose determinant is 13 - 55t + 50t²."""
    x0 = np.array([[0.0, 0.0], [5.0, 1.0], [2.0, 3.0]])
    x1 = np.array([[0.0, 0.0], [0.0, -4.0], [2.0, -7.0]])
    return ElementSpec(TRIANGLE, 1, x0, x1, ident)


# nodes in canonical grid order, placed by position
ZERO_CORNER_NODES = [
    ("0.33333333333333331", "0.33333333333333331"),  # ξ = (0, 0)
    ("0.83333333333333326", "0.33333333333333331"),  # (1/2, 0)
    ("1.3333333333333333", "0.33333333333333331"),   # (1, 0)
    ("0.33333333333333331", "0.83333333333333326"),  # (0, 1/2)
    ("0.83333333333333326", "0.58333333333333315"),  # (1/2, 1/2)
    ("0.33333333333333331", "1.3333333333333333"),   # (0, 1)
]


def zero_corner_triangle(ident: str = "zero-corner") -> ElementSpec:
    x = np.array([[float(a), float(b)] for a, b in ZERO_CORNER_NODES])
    return ElementSpec(TRIANGLE, 2, x, None, ident)


COLLAPSE_ROOT = (Fraction(55, 100), Fraction(425, 10000))  # r = a - sqrt(b)
