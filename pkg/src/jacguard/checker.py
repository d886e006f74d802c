"""Conservative validity tests on Bézier coefficients of |J|.

``max_valid_step`` searches space-time for the earliest time at which the
Jacobian determinant can become non-positive; ``check_static`` is the same
branch-and-bound restricted to one instant.  Subdomains are kept in a heap
ordered by start time, then by the upper end of their minimum inclusion
interval, then by insertion order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bases import MatrixCache, default_cache
from .elements import (
    ElementClass, corner_indices, det_orders, domain_points, subdivision_maps,
)
from .jacobian import ElementSpec, bezier_coeffs, exact_jacobian
from .numerics import Interval

VALID_THROUGHOUT = "ValidThroughout"
INVERSION = "Inversion"
GAVE_UP = "GaveUp"
VALID = "Valid"
INVALID = "Invalid"
UNDECIDED = "Undecided"


class InvalidAtStart(ValueError):
    def __init__(self, message: str, element_id: str = ""):
        super().__init__(message)
        self.element_id = element_id


class BadAccuracy(ValueError):
    pass


@dataclass(frozen=True)
class Witness:
    point: tuple[Fraction, ...]
    time: Fraction | None = None


@dataclass(frozen=True)
class DynamicResult:
    verdict: str
    t_lower: float
    witness: Witness | None = None
    quad_seq: tuple[int, ...] = ()
    depth: int = 0
    pops: int = 0
    pruned: bool = False


@dataclass(frozen=True)
class StaticResult:
    verdict: str
    witness: Witness | None = None
    quad_seq: tuple[int, ...] = ()
    depth: int = 0
    pops: int = 0


def min_inclusion(lo: np.ndarray, hi: np.ndarray, corners: Sequence[int]) -> Interval:
    """[min of all lower ends, min of corner upper ends]."""
    return Interval(float(np.min(lo)), float(np.min(np.asarray(hi)[list(corners)])))


def verify_witness(spec: ElementSpec, w: Witness) -> bool:
    """Exact check that |J| <= 0 at the witness."""
    from .elements import contains
    if not contains(spec.cls, w.point):
        return False
    if w.time is not None and not (0 <= w.time <= 1):
        return False
    return exact_jacobian(spec, w.point, w.time if spec.dynamic else None) <= 0


@dataclass
class _Grid:
    """Per-(class, order, dynamic) lookup data for the search."""
    ops: object
    corners: np.ndarray
    corner_points: list
    maps: list
    q_spatial: int


@dataclass
class Checker:
    delta: float = 1e-6
    l_max: int = 40
    queue_cap: int = 200_000
    cache: MatrixCache = field(default_factory=default_cache)
    verify: bool = True
    exact_fallback: bool = True
    trace: Callable[[float, float], None] | None = None

    def __post_init__(self):
        self._grids: dict = {}

    def _grid(self, cls: ElementClass, p: int, dynamic: bool) -> _Grid:
        key = (cls.name, p, dynamic)
        g = self._grids.get(key)
        if g is None:
            ops = self.cache.for_element(cls, p, dynamic)
            orders = det_orders(cls, p, dynamic)
            corners = np.array(corner_indices(cls, orders, at_end_time=True))
            pts = domain_points(cls, orders)
            g = _Grid(ops, corners, [pts[c][:cls.n] for c in corners],
                      subdivision_maps(cls.static_kind), ops.Q_spatial)
            self._grids[key] = g
        return g

    @staticmethod
    def _global_point(grid: _Grid, seq: Sequence[int], ref) -> tuple[Fraction, ...]:
        pt = tuple(ref)
        for q in reversed(seq):
            pt = grid.maps[q - 1](pt)
        return pt

    def _certify(self, spec, grid, lo, hi, seq, time):
        """Index into grid.corners of a corner proven non-positive, or None."""
        ch = hi[grid.corners]
        k = int(np.argmin(ch))
        if ch[k] <= 0:
            return k
        if not self.exact_fallback:
            return None
        cl = lo[grid.corners]
        for k in np.nonzero(cl <= 0)[0]:
            pt = self._global_point(grid, seq, grid.corner_points[k])
            if exact_jacobian(spec, pt, None if time is None else Fraction(time)) <= 0:
                return int(k)
        return None

    def _checked(self, spec, result):
        if self.verify and result.witness is not None and not verify_witness(spec, result.witness):
            raise RuntimeError("internal error: witness failed exact verification")
        return result

    # -- dynamic ---------------------------------------------------------------

    def max_valid_step(self, spec: ElementSpec, t_cutoff: float | None = None) -> DynamicResult:
        if not self.delta > 0:
            raise BadAccuracy(f"accuracy must be positive, got {self.delta}")
        if not spec.dynamic:
            raise ValueError("max_valid_step needs control points at t=0 and t=1")
        grid = self._grid(spec.cls, spec.p, True)
        ops = grid.ops
        coeffs = bezier_coeffs(spec, self.cache, dynamic=True)
        corners = grid.corners
        heap = []
        counter = 0
        root_hi = float(coeffs.hi[corners].min())
        heapq.heappush(heap, (0.0, root_hi, counter, coeffs.lo, coeffs.hi, 1.0, 0, ()))
        t_lo, t_hi = 0.0, float("inf")
        found = False
        witness, wit_seq = None, ()
        level, deepest = 0, ()
        pops = 0
        start_checked = False
        while True:
            if found and t_hi - t_lo <= self.delta and t_lo > 0:
                return self._checked(spec, DynamicResult(INVERSION, t_lo, witness, wit_seq, level, pops))
            if not heap:
                if found:
                    return DynamicResult(GAVE_UP, t_lo, None, deepest, level, pops)
                return DynamicResult(VALID_THROUGHOUT, 1.0, None, (), level, pops)
            start, _, _, lo, hi, end, depth, seq = heapq.heappop(heap)
            pops += 1
            t_lo = max(t_lo, start)
            if self.trace is not None:
                self.trace(t_lo, t_hi)
            level = max(level, depth)
            if len(seq) > len(deepest):
                deepest = seq
            if level > self.l_max:
                return DynamicResult(GAVE_UP, t_lo, None, deepest, level, pops)
            if t_cutoff is not None and t_lo > t_cutoff:
                return DynamicResult(GAVE_UP, t_lo, None, deepest, level, pops, pruned=True)
            k = self._certify(spec, grid, lo, hi, seq, end)
            if k is not None:
                if start == 0.0 and not start_checked:
                    start_checked = True
                    if self.check_static(spec.at_start()).verdict == INVALID:
                        raise InvalidAtStart("element is invalid at t=0", spec.ident)
                if end < t_hi:
                    found = True
                    t_hi = end
                    witness = Witness(self._global_point(grid, seq, grid.corner_points[k]), Fraction(end))
                    wit_seq = seq
                mid = 0.5 * (start + end)
                clo, chi = ops.time_halves(lo, hi)
                spans = ((start, mid), (mid, end))
                for c in range(2):
                    counter += 1
                    heapq.heappush(heap, (spans[c][0], float(chi[c][corners].min()), counter,
                                          clo[c], chi[c], spans[c][1], depth + 1, seq))
            elif not float(lo.min()) > 0:
                mid = 0.5 * (start + end)
                clo, chi = ops.subdivide(lo, hi)
                his = chi[:, corners].min(axis=1)
                qs = grid.q_spatial
                for q in range(ops.Q):
                    upper = q >= qs
                    counter += 1
                    child_seq = seq + (q % qs + 1,)
                    heapq.heappush(heap, (mid if upper else start, float(his[q]), counter,
                                          clo[q], chi[q], end if upper else mid, depth + 1, child_seq))
            if len(heap) > self.queue_cap:
                return DynamicResult(GAVE_UP, t_lo, None, deepest, level, pops)

    # -- static ----------------------------------------------------------------

    def check_static(self, spec: ElementSpec, l_max: int | None = None) -> StaticResult:
        l_max = self.l_max if l_max is None else l_max
        if spec.dynamic:
            spec = spec.at_start()
        grid = self._grid(spec.cls, spec.p, False)
        ops = grid.ops
        coeffs = bezier_coeffs(spec, self.cache, dynamic=False)
        corners = grid.corners
        counter = 0
        heap = [(float(coeffs.hi[corners].min()), counter, coeffs.lo, coeffs.hi, 0, ())]
        pops = level = 0
        while heap:
            _, _, lo, hi, depth, seq = heapq.heappop(heap)
            pops += 1
            level = max(level, depth)
            if level > l_max:
                return StaticResult(UNDECIDED, None, seq, level, pops)
            k = self._certify(spec, grid, lo, hi, seq, None)
            if k is not None:
                w = Witness(self._global_point(grid, seq, grid.corner_points[k]), None)
                return self._checked(spec, StaticResult(INVALID, w, seq, level, pops))
            if float(lo.min()) > 0:
                continue
            clo, chi = ops.subdivide(lo, hi)
            his = chi[:, corners].min(axis=1)
            for q in range(ops.Q):
                counter += 1
                heapq.heappush(heap, (float(his[q]), counter, clo[q], chi[q], depth + 1, seq + (q + 1,)))
            if len(heap) > self.queue_cap:
                return StaticResult(UNDECIDED, None, seq, level, pops)
        return StaticResult(VALID, None, (), level, pops)


def max_valid_step(spec: ElementSpec, delta: float = 1e-6, l_max: int = 40,
                   t_cutoff: float | None = None, cache: MatrixCache | None = None) -> DynamicResult:
    return Checker(delta, l_max, cache=cache or default_cache()).max_valid_step(spec, t_cutoff)


def check_static(spec: ElementSpec, l_max: int = 40, cache: MatrixCache | None = None) -> StaticResult:
    return Checker(l_max=l_max, cache=cache or default_cache()).check_static(spec)
