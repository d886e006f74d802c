"""Lagrange coefficients of the Jacobian determinant on the determinant grid.

Coefficients are values of |J| at grid points.  They are assembled from a
precomputed table of geometric basis gradients at those points, so any
(class, order) pair is handled by the same few interval matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bases import MatrixCache, default_cache, lagrange_grad_eval
from .elements import (
    BlockOrders, ElementClass, check_order, det_orders, domain_points, grid_size, geom_orders,
)
from .numerics import (
    IntervalArray, IntervalMatrix, RationalMatrix, det_exact, det_interval_mr, iv_matmul,
    mid_rad, mr_products, mr_to_interval,
    rat_to_interval,
)


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ElementSpec:
    """Control points in canonical geometric-grid order, shape (nodes, n)."""
    cls: ElementClass
    p: int
    control_t0: np.ndarray
    control_t1: np.ndarray | None = None
    ident: str = ""

    def __post_init__(self):
        check_order(self.cls, self.p)
        want = (grid_size(self.cls, geom_orders(self.cls, self.p)), self.cls.n)
        x0 = self._points(self.control_t0, want, "t=0")
        object.__setattr__(self, "control_t0", x0)
        if self.control_t1 is not None:
            object.__setattr__(self, "control_t1", self._points(self.control_t1, want, "t=1"))

    @staticmethod
    def _points(raw, want, label) -> np.ndarray:
        x = np.array(raw, dtype=float)
        if x.shape != want:
            raise DimensionMismatch(f"{label} control points have shape {x.shape}, expected {want}")
        if not np.all(np.isfinite(x)):
            raise DimensionMismatch("control points must be finite")
        return x

    @property
    def dynamic(self) -> bool:
        return self.control_t1 is not None

    def at_start(self) -> "ElementSpec":
        return ElementSpec(self.cls, self.p, self.control_t0, None, self.ident)

    def at_end(self) -> "ElementSpec":
        x = self.control_t0 if self.control_t1 is None else self.control_t1
        return ElementSpec(self.cls, self.p, x, None, self.ident)

    def frozen(self, t) -> "ElementSpec":
        """Static element at time ``t``; the interpolated points must be exact doubles."""
        t = Fraction(t)
        if self.control_t1 is None:
            return self.at_start()
        pts = []
        for a, b in zip(self.control_t0.ravel().tolist(), self.control_t1.ravel().tolist()):
            v = (1 - t) * Fraction(a) + t * Fraction(b)
            if Fraction(float(v)) != v:
                raise ValueError(f"control points at t={t} are not representable exactly")
            pts.append(float(v))
        return ElementSpec(self.cls, self.p, np.array(pts).reshape(self.control_t0.shape), None, self.ident)

    def exact_controls(self, t=None) -> list[tuple[Fraction, ...]]:
        x0 = [tuple(Fraction(v) for v in row) for row in self.control_t0.tolist()]
        if t is None or self.control_t1 is None:
            return x0
        t = Fraction(t)
        x1 = [tuple(Fraction(v) for v in row) for row in self.control_t1.tolist()]
        return [tuple((1 - t) * a + t * b for a, b in zip(r0, r1)) for r0, r1 in zip(x0, x1)]


@dataclass(frozen=True, eq=False)
class GradientTable:
    """Row ``b * N + i`` holds d/dξ_b of every geometric basis function at grid point i."""
    cls: ElementClass
    p: int
    matrix: IntervalMatrix

    @property
    def points(self) -> int:
        return self.matrix.shape[0] // self.cls.n


def gradient_shape(cls: ElementClass, p: int) -> tuple[int, int]:
    return (cls.n * grid_size(cls, det_orders(cls, p, False)),
            grid_size(cls, geom_orders(cls, p)))


@lru_cache(maxsize=None)
def exact_gradient_rows(cls: ElementClass, p: int) -> RationalMatrix:
    pts = domain_points(cls, det_orders(cls, p, False))
    nodes = grid_size(cls, geom_orders(cls, p))
    per_point = [[lagrange_grad_eval(cls, p, j, g) for j in range(nodes)] for g in pts]
    rows = []
    for b in range(cls.n):
        for grads in per_point:
            rows.append([gr[b] for gr in grads])
    return RationalMatrix(rows)


def build_gradient_table(cls: ElementClass, p: int) -> GradientTable:
    return GradientTable(cls, p, exact_gradient_rows(cls, p).to_interval())


@dataclass
class CoefficientVector:
    basis: str  # "lagrange" or "bernstein"
    lo: np.ndarray
    hi: np.ndarray
    orders: BlockOrders
    dynamic: bool
    cls: ElementClass

    @property
    def values(self):
        return IntervalArray(self.lo, self.hi).to_list()

    def __len__(self) -> int:
        return len(self.lo)


@lru_cache(maxsize=None)
def _time_weights(m_time: int):
    """Intervals for (1 - t_k, t_k), t_k = k / m_time."""
    ks = range(m_time + 1)
    one_minus = [rat_to_interval(1 - Fraction(k, m_time)) for k in ks]
    t = [rat_to_interval(Fraction(k, m_time)) for k in ks]
    return (np.array([i.lo for i in one_minus]), np.array([i.hi for i in one_minus]),
            np.array([i.lo for i in t]), np.array([i.hi for i in t]))


def _determinants(y: IntervalArray, n: int, npts: int, ntimes: int) -> IntervalArray:
    """``y`` is (n*npts, ntimes*n): entry [b*npts+i, k*n+a] = d x_a / d ξ_b."""
    lo = y.lo.reshape(n, npts, ntimes, n)
    hi = y.hi.reshape(n, npts, ntimes, n)
    m = [[IntervalArray(lo[b, :, :, a], hi[b, :, :, a]) for b in range(n)] for a in range(n)]
    d = det_interval_mr(m)
    # (npts, ntimes) -> time slowest
    return IntervalArray(d.lo.T.reshape(-1), d.hi.T.reshape(-1))


def lagrange_coeffs_static(spec: ElementSpec, table: GradientTable | None = None,
                           cache: MatrixCache | None = None) -> CoefficientVector:
    table = _table(spec, table, cache)
    n = spec.cls.n
    x = IntervalArray.exact(spec.control_t0)
    y = iv_matmul(table.matrix, x)
    d = _determinants(y, n, table.points, 1)
    return CoefficientVector("lagrange", d.lo, d.hi, det_orders(spec.cls, spec.p, False), False, spec.cls)


def lagrange_coeffs_dynamic(spec: ElementSpec, table: GradientTable | None = None,
                            cache: MatrixCache | None = None) -> CoefficientVector:
    if spec.control_t1 is None:
        raise DimensionMismatch("dynamic assembly needs control points at t=1")
    table = _table(spec, table, cache)
    n = spec.cls.n
    orders = det_orders(spec.cls, spec.p, True)
    wl, wh, tl, th = _time_weights(orders.time)
    x0 = (spec.control_t0[:, None, :], 0.0)
    x1 = (spec.control_t1[:, None, :], 0.0)
    w0 = mid_rad(wl[None, :, None], wh[None, :, None])
    w1 = mid_rad(tl[None, :, None], th[None, :, None])
    c = mr_to_interval(*mr_products([(1, x0, w0), (1, x1, w1)]))  # (nodes, ntimes, n)
    nodes = c.lo.shape[0]
    c = IntervalArray(c.lo.reshape(nodes, -1), c.hi.reshape(nodes, -1))
    y = iv_matmul(table.matrix, c)
    d = _determinants(y, n, table.points, orders.time + 1)
    return CoefficientVector("lagrange", d.lo, d.hi, orders, True, spec.cls)


def _table(spec, table, cache):
    if table is None:
        table = (cache or default_cache()).gradient_table(spec.cls, spec.p)
    if table.cls != spec.cls or table.p != spec.p:
        raise DimensionMismatch("gradient table does not match the element")
    return table


def to_bezier(coeffs: CoefficientVector, cache: MatrixCache | None = None,
              build: bool = True) -> CoefficientVector:
    """Interval product with T_L→B; ``build=False`` raises CacheMiss instead of building."""
    if coeffs.basis != "lagrange":
        raise ValueError("expected Lagrange coefficients")
    cache = cache or default_cache()
    ops = cache.ops(coeffs.cls, coeffs.orders) if build else cache.lookup(coeffs.cls, coeffs.orders)
    lo, hi = ops.to_bezier(coeffs.lo, coeffs.hi)
    return CoefficientVector("bernstein", lo, hi, coeffs.orders, coeffs.dynamic, coeffs.cls)


def bezier_coeffs(spec: ElementSpec, cache: MatrixCache | None = None, dynamic: bool | None = None):
    """Bernstein coefficients of |J| for ``spec`` (dynamic when it has two control sets)."""
    cache = cache or default_cache()
    if dynamic is None:
        dynamic = spec.dynamic
    lag = (lagrange_coeffs_dynamic if dynamic else lagrange_coeffs_static)(spec, cache=cache)
    return to_bezier(lag, cache)


@lru_cache(maxsize=4096)
def _basis_gradients(cls: ElementClass, p: int, point: tuple) -> tuple:
    nodes = grid_size(cls, geom_orders(cls, p))
    return tuple(lagrange_grad_eval(cls, p, j, point) for j in range(nodes))


def exact_jacobian(spec: ElementSpec, point: Sequence, time=None) -> Fraction:
    """|J| at (point, time) in exact arithmetic; ``time`` ignored for static elements."""
    ctrl = spec.exact_controls(time)
    n = spec.cls.n
    mat = [[Fraction(0)] * n for _ in range(n)]
    grads = _basis_gradients(spec.cls, spec.p, tuple(Fraction(c) for c in point))
    for x, g in zip(ctrl, grads):
        for a in range(n):
            if x[a]:
                for b in range(n):
                    if g[b]:
                        mat[a][b] += x[a] * g[b]
    return det_exact(mat)
