"""Independent ground truth: exact sampling and the linear-triangle closed form.

Nothing here reuses the checker's basis machinery.  Geometric maps are
rebuilt in the monomial basis from an exact Vandermonde inverse, so a bug
in the product-form Lagrange gradients cannot hide itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np

from .elements import BlockOrders, ElementClass, domain_points, geom_orders
from .jacobian import ElementSpec
from .numerics import (
    IntervalArray, RationalMatrix, det_exact, iv_matmul, mid_rad, rat_invert,
)

_U = 2.0 ** -53
_FLOOR = 2.0 ** -1022


class NotLinearTriangle(ValueError):
    pass


@lru_cache(maxsize=None)
def monomials(cls: ElementClass, p: int) -> tuple[tuple[int, ...], ...]:
    """Exponents spanning the order-p geometric space of ``cls``."""
    s, n = cls.s, cls.n
    out = []
    for e in product(range(p + 1), repeat=n):
        if sum(e[:s]) <= p:
            out.append(e)
    return tuple(out)


def _mono(e: Sequence[int], x: Sequence[Fraction]) -> Fraction:
    v = Fraction(1)
    for k, xi in zip(e, x):
        if k:
            v *= xi ** k
    return v


def _mono_grad(e: Sequence[int], x: Sequence[Fraction]) -> list[Fraction]:
    out = []
    for b in range(len(e)):
        if e[b] == 0:
            out.append(Fraction(0))
            continue
        v = Fraction(e[b])
        for k, (ek, xk) in enumerate(zip(e, x)):
            power = ek - 1 if k == b else ek
            if power:
                v *= xk ** power
        out.append(v)
    return out


@lru_cache(maxsize=None)
def vandermonde_inverse(cls: ElementClass, p: int) -> RationalMatrix:
    """Column j holds the monomial coefficients of the j-th nodal basis function."""
    nodes = domain_points(cls, geom_orders(cls, p))
    monos = monomials(cls, p)
    if len(monos) != len(nodes):
        raise AssertionError("monomial space does not match the node count")
    return rat_invert(RationalMatrix([[_mono(e, x) for e in monos] for x in nodes]))


@lru_cache(maxsize=None)
def sample_points(cls: ElementClass, r: int) -> tuple[tuple[Fraction, ...], ...]:
    """(1/r)Z^n intersected with the reference domain."""
    return tuple(domain_points(cls, BlockOrders(r, r, 0)))


@lru_cache(maxsize=8)
def _sample_gradients(cls: ElementClass, p: int, r: int):
    pts = sample_points(cls, r)
    vinv = vandermonde_inverse(cls, p)
    monos = monomials(cls, p)
    rows = []
    for b in range(cls.n):
        for x in pts:
            rows.append([_mono_grad(e, x)[b] for e in monos])
    g = RationalMatrix(rows) @ vinv
    return g.to_interval()


class ExactMap:
    """Monomial coefficients of x(ξ, t) = (1 - t) x⁰(ξ) + t x¹(ξ)."""

    def __init__(self, spec: ElementSpec):
        self.spec = spec
        vinv = vandermonde_inverse(spec.cls, spec.p)
        self.monos = monomials(spec.cls, spec.p)
        self.c0 = self._coeffs(vinv, spec.control_t0)
        self.c1 = self._coeffs(vinv, spec.control_t1) if spec.dynamic else self.c0

    @staticmethod
    def _coeffs(vinv, ctrl):
        cols = []
        for a in range(ctrl.shape[1]):
            cols.append(vinv.matvec([Fraction(v) for v in ctrl[:, a].tolist()]))
        return cols

    def jacobian(self, point: Sequence, time=None) -> Fraction:
        x = [Fraction(v) for v in point]
        t = Fraction(0) if time is None else Fraction(time)
        n = self.spec.cls.n
        grads = [_mono_grad(e, x) for e in self.monos]
        mat = []
        for a in range(n):
            row = []
            for b in range(n):
                d0 = sum((c * g[b] for c, g in zip(self.c0[a], grads) if c and g[b]), Fraction(0))
                d1 = sum((c * g[b] for c, g in zip(self.c1[a], grads) if c and g[b]), Fraction(0))
                row.append((1 - t) * d0 + t * d1)
            mat.append(row)
        return det_exact(mat)


def exact_jacobian_oracle(spec: ElementSpec, point: Sequence, time=None) -> Fraction:
    return ExactMap(spec).jacobian(point, time)


@dataclass(frozen=True)
class Sample:
    point: tuple[Fraction, ...]
    time: Fraction
    value: Fraction


def _permanent_abs(m, n):
    if n == 2:
        return m[0][0] * m[1][1] + m[0][1] * m[1][0]
    return (m[0][0] * (m[1][1] * m[2][2] + m[1][2] * m[2][1])
            + m[0][1] * (m[1][0] * m[2][2] + m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] + m[1][1] * m[2][0]))


def _det_float(m, n):
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def falsify_by_sampling(spec: ElementSpec, r: int, k: int, t_max=None) -> Sample | None:
    """Earliest sample on (1/r)Z^n ∩ σ × {j/k} with exact |J| <= 0, if any.

    Samples are screened with a rigorous floating-point bound; only those the
    bound cannot prove positive are re-evaluated in rationals.  With ``t_max``
    only times ``j/k <= t_max`` are examined.
    """
    if r < 1 or k < 2:
        raise ValueError("need r >= 1 and k >= 2")
    cls, n = spec.cls, spec.cls.n
    times = [Fraction(j, k) for j in range(k + 1)]
    if t_max is not None:
        t_max = Fraction(t_max)
        times = [t for t in times if t <= t_max]
    if not times:
        return None
    if not spec.dynamic:
        times = [Fraction(0)]
    pts = sample_points(cls, r)
    g = _sample_gradients(cls, spec.p, r)
    x1 = spec.control_t1 if spec.dynamic else spec.control_t0
    y = iv_matmul(g, IntervalArray.exact(np.hstack([spec.control_t0, x1])))
    npts, nt = len(pts), len(times)
    # entries at t=0 and t=1, then blended per sample time in midpoint-radius form
    m0, r0 = mid_rad(y.lo[:, :n], y.hi[:, :n])
    m1, r1 = mid_rad(y.lo[:, n:], y.hi[:, n:])
    w1 = np.array([float(t) for t in times])
    w0 = np.array([float(1 - t) for t in times])
    # entry (a, b) = d x_a / d ξ_b; per-point arrays (npts, 1), blended (npts, nt)
    ent = lambda arr, a, b: np.ascontiguousarray(arr.reshape(n, npts, n)[b, :, a])[:, None]
    w0, w1 = w0[None, :], w1[None, :]
    M, B = [], []
    with np.errstate(over="ignore", invalid="ignore"):
        for a in range(n):
            M.append([]), B.append([])
            for b in range(n):
                e0, e1 = ent(m0, a, b), ent(m1, a, b)
                mid = w0 * e0 + w1 * e1
                # w0 + w1 = 1, so the blended radius is at most max(r0, r1)
                rad = (np.maximum(ent(r0, a, b), ent(r1, a, b)) * (1 + 4 * _U)
                       + (np.abs(e0) + np.abs(e1)) * (6 * _U) + 4 * _FLOOR)
                M[a].append(mid)
                B[a].append((np.abs(mid) + rad) * (1 + 2 * _U))
    A = [[np.abs(v) for v in row] for row in M]
    with np.errstate(over="ignore", invalid="ignore"):
        d = _det_float(M, n)
        p_hi = _permanent_abs(B, n)
        p_lo = _permanent_abs(A, n)
        err = (p_hi - p_lo) + 64 * _U * p_hi + 1e-300
    sure = np.isfinite(d) & np.isfinite(err) & (d > err) & (p_hi > 1e-250)
    cand = np.argwhere(~sure.T)  # (time, point) pairs in time-major order
    if len(cand) == 0:
        return None
    exact = ExactMap(spec)
    for ti, pi in cand:
        t = times[ti] if spec.dynamic else None
        v = exact.jacobian(pts[pi], t)
        if v <= 0:
            return Sample(pts[pi], times[ti], v)
    return None


# -- linear triangle closed form ----------------------------------------------

def _linear_triangle_poly(spec: ElementSpec) -> tuple[Fraction, Fraction, Fraction]:
    if spec.cls.name != "triangle" or spec.p != 1 or not spec.dynamic:
        raise NotLinearTriangle("closed form needs a dynamic linear triangle")
    x0 = [[Fraction(v) for v in row] for row in spec.control_t0.tolist()]
    x1 = [[Fraction(v) for v in row] for row in spec.control_t1.tolist()]

    def edge(i):
        e0 = [x0[i][a] - x0[0][a] for a in range(2)]
        e1 = [x1[i][a] - x1[0][a] for a in range(2)]
        return e0, [b - a for a, b in zip(e0, e1)]

    (u0, u1), (v0, v1) = edge(1), edge(2)
    # (u0 + t u1) x (v0 + t v1)
    a = u1[0] * v1[1] - u1[1] * v1[0]
    b = u0[0] * v1[1] - u0[1] * v1[0] + u1[0] * v0[1] - u1[1] * v0[0]
    c = u0[0] * v0[1] - u0[1] * v0[0]
    return a, b, c


def linear_triangle_poly(spec: ElementSpec) -> tuple[Fraction, Fraction, Fraction]:
    """Coefficients (a, b, c) with |J|(t) = a t² + b t + c."""
    return _linear_triangle_poly(spec)


def _pieces(a, b):
    """Monotone pieces of [0, 1] for a t² + b t + c."""
    if a != 0:
        tc = -b / (2 * a)
        if 0 < tc < 1:
            return [(Fraction(0), tc), (tc, Fraction(1))]
    return [(Fraction(0), Fraction(1))]


def linear_triangle_positive_on(spec: ElementSpec, t_end) -> bool:
    """Exactly decides |J|(t) > 0 for every t in [0, t_end]."""
    a, b, c = _linear_triangle_poly(spec)
    t_end = Fraction(t_end)
    f = lambda t: (a * t + b) * t + c
    checks = [Fraction(0), t_end]
    if a != 0:
        tc = -b / (2 * a)
        if 0 < tc < t_end:
            checks.append(tc)
    return all(f(t) > 0 for t in checks)


def linear_triangle_t_star(spec: ElementSpec, width=Fraction(1, 10 ** 12)):
    """Bracket (lo, hi) of the smallest root in (0, 1], or None if there is none.

    The root lies in (lo, hi]; ``lo == hi`` when it was located exactly.
    """
    a, b, c = _linear_triangle_poly(spec)
    width = Fraction(width)
    f = lambda t: (a * t + b) * t + c
    if c <= 0:
        raise ValueError("triangle is not positively oriented at t=0")
    for u, v in _pieces(a, b):
        fv = f(v)
        if fv > 0:
            continue
        if fv == 0:
            return v, v
        lo, hi = u, v
        while hi - lo > width:
            mid = (lo + hi) / 2
            fm = f(mid)
            if fm == 0:
                return mid, mid
            if fm > 0:
                lo = mid
            else:
                hi = mid
        return lo, hi
    return None
