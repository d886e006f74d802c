"""Random element factories used by tests, benchmarks and the CLI."""

from __future__ import annotations

import numpy as np

from .elements import ElementClass, domain_points, geom_orders
from .jacobian import ElementSpec


def reference_nodes(cls: ElementClass, p: int) -> np.ndarray:
    return np.array([[float(x) for x in g] for g in domain_points(cls, geom_orders(cls, p))])


def _rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_rest_shape(cls: ElementClass, p: int, rng: np.random.Generator,
                      wobble: float = 0.04) -> np.ndarray:
    """Well-shaped element: random rotation and stretch of the reference, plus node noise."""
    n = cls.n
    nodes = reference_nodes(cls, p)
    lin = _rotation(rng, n) @ np.diag(rng.uniform(0.7, 1.4, n))
    x = nodes @ lin.T + rng.uniform(-1, 1, n)
    if p > 1:
        x = x + rng.normal(0.0, wobble, x.shape)
    return x


def valid_rest_shape(cls: ElementClass, p: int, rng: np.random.Generator, tries: int = 100) -> np.ndarray:
    """A random rest shape that the static check certifies valid."""
    from .checker import VALID, check_static
    for _ in range(tries):
        x = random_rest_shape(cls, p, rng)
        if check_static(ElementSpec(cls, p, x)).verdict == VALID:
            return x
    raise RuntimeError("could not draw a valid rest shape")


def random_trajectory_element(cls: ElementClass, p: int, rng: np.random.Generator,
                              amplitude: float | None = None, ident: str = "") -> ElementSpec:
    """Valid rest shape at t=0 and a random perturbation of it at t=1.

    The displacement mixes a random affine deformation with independent node
    motion; with the default amplitude range a sizeable share of elements
    invert before t=1.
    """
    n = cls.n
    x0 = valid_rest_shape(cls, p, rng)
    amp = rng.uniform(0.05, 1.2) if amplitude is None else amplitude
    lin = np.eye(n) + rng.normal(0.0, 0.5 * amp, (n, n))
    centre = x0.mean(axis=0)
    x1 = (x0 - centre) @ lin.T + centre + rng.normal(0.0, amp * 0.35, x0.shape)
    return ElementSpec(cls, p, x0, x1, ident)


def random_linear_triangle(rng: np.random.Generator, ident: str = "") -> ElementSpec:
    from .elements import CLASSES
    return random_trajectory_element(CLASSES["triangle"], 1, rng, ident=ident)


def identity_element(cls: ElementClass, p: int, dynamic: bool = True, ident: str = "") -> ElementSpec:
    nodes = reference_nodes(cls, p)
    return ElementSpec(cls, p, nodes, nodes.copy() if dynamic else None, ident)
