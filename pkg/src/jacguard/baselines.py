"""Non-conservative static validity tests, for benchmarking only.

Both methods use plain floating point and can call an invalid element valid.
``fp_bezier_check`` runs the Bézier subdivision test without intervals;
``quadrature_point_check`` looks at the sign of |J| at base-rule points.
"""

from __future__ import annotations

import heapq
from functools import lru_cache

import numpy as np

from .bases import MatrixCache, default_cache, lagrange_grad_eval
from .checker import INVALID, UNDECIDED, VALID
from .elements import ElementClass, corner_indices, det_orders, geom_orders, grid_size
from .jacobian import ElementSpec


def _float_det(jac: np.ndarray) -> np.ndarray:
    """Determinants of a stack of (n, n) matrices."""
    return np.linalg.det(jac)


class _FloatOps:
    def __init__(self, ops):
        self.ops = ops
        self.l2b = [b.l2b._prepare()[0] for b in ops.blocks]
        self.children = [b.children._prepare()[0] for b in ops.blocks]
        self.counts = [b.count for b in ops.blocks]

    def _mode(self, x, mat, axis, cb):
        x = np.moveaxis(x, axis, 0)
        shp = x.shape
        k = shp[0]
        y = (mat @ x.reshape(k, -1)).reshape((cb, k) + shp[1:])
        y = np.moveaxis(y, 1, axis + 1)
        return y.reshape((cb * y.shape[1],) + y.shape[2:])

    def _run(self, v, mats, counts):
        ops = self.ops
        x = np.asarray(v, dtype=float).reshape((-1,) + ops.shape)
        for b, (mat, cb) in enumerate(zip(mats, counts)):
            x = self._mode(x, mat, ops._axis(b), cb)
        return x.reshape(x.shape[0], ops.N)

    def to_bezier(self, v):
        return self._run(v, self.l2b, [1] * len(self.l2b))[0]

    def subdivide(self, v):
        return self._run(v, self.children, self.counts)


@lru_cache(maxsize=None)
def _float_setup(cls: ElementClass, p: int, cache: MatrixCache):
    ops = _FloatOps(cache.for_element(cls, p, False))
    grads = cache.gradient_table(cls, p).matrix._prepare()[0]
    corners = corner_indices(cls, det_orders(cls, p, False))
    return ops, grads, corners


def _float_lagrange(spec: ElementSpec, grads: np.ndarray) -> np.ndarray:
    n = spec.cls.n
    y = grads @ spec.control_t0  # rows b * N + i, columns a
    npts = y.shape[0] // n
    jac = y.reshape(n, npts, n).transpose(1, 2, 0)  # (point, a, b)
    return _float_det(jac)


def fp_bezier_check(spec: ElementSpec, l_max: int = 40, cache: MatrixCache | None = None,
                    queue_cap: int = 200_000) -> str:
    """Bézier subdivision on machine reals; Valid, Invalid or Undecided."""
    cache = cache or default_cache()
    ops, grads, corners = _float_setup(spec.cls, spec.p, cache)
    b = ops.to_bezier(_float_lagrange(spec, grads))
    heap = [(float(b[corners].min()), 0, 0, b)]
    counter = 0
    while heap:
        _, _, depth, b = heapq.heappop(heap)
        if depth > l_max:
            return UNDECIDED
        if b[corners].min() <= 0:
            return INVALID
        if b.min() > 0:
            continue
        kids = ops.subdivide(b)
        for c in kids:
            counter += 1
            heapq.heappush(heap, (float(c[corners].min()), counter, depth + 1, c))
        if len(heap) > queue_cap:
            return UNDECIDED
    return VALID


@lru_cache(maxsize=None)
def _rule_gradients(cls: ElementClass, p: int) -> np.ndarray:
    from .quadrature import base_rule
    pts = base_rule(cls, 2 * p).points
    nodes = grid_size(cls, geom_orders(cls, p))
    per_point = [[lagrange_grad_eval(cls, p, j, x) for j in range(nodes)] for x in pts]
    return np.array([[float(g[b]) for g in grads] for b in range(cls.n) for grads in per_point])


def quadrature_point_check(spec: ElementSpec, cache: MatrixCache | None = None) -> str:
    """Valid when |J| > 0 at every point of the degree-2p base rule."""
    g = _rule_gradients(spec.cls, spec.p)
    return VALID if _float_lagrange(spec, g).min() > 0 else INVALID


BASELINES = {
    "fp-bezier": fp_bezier_check,
    "quadrature-points": quadrature_point_check,
    "sampling": quadrature_point_check,
}
