"""Invalidity-aware adaptive quadrature.

The spatial part of a checker's subdivision sequence is replayed on the
reference domain.  A base rule is mapped into every leaf, and the corners of
every leaf are added as zero-weight evaluation points, so an integrand that
blows up where |J| <= 0 is evaluated on the inverted region whenever the
checker found one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from itertools import product
from typing import Callable, Sequence

from .elements import AffineMap, ElementClass, UnsupportedOrder, check_order, subdivision_maps
from .jacobian import ElementSpec, exact_jacobian
from .numerics import (
    Interval, iv_add, iv_mul, rat_to_interval, rational_from_str, rational_to_str,
)

Point = tuple[Fraction, ...]


class BadSequence(ValueError):
    pass


class SingularPoint(Exception):
    """Raised by an integrand that cannot be evaluated at a point."""


@dataclass(frozen=True)
class Divergent:
    point: Point
    reason: str = "integrand singular"


@dataclass
class QuadratureRule:
    points: list[Point]
    weights: list[Fraction]
    leaf_maps: list[AffineMap] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def weighted(self) -> int:
        return sum(1 for w in self.weights if w != 0)

    def total_weight(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def to_records(self) -> str:
        lines = [f"# quadrature rule: {len(self.points)} points, dimension {len(self.points[0])}",
                 "# weight x1 ... xn"]
        for w, x in zip(self.weights, self.points):
            lines.append(" ".join([rational_to_str(w)] + [rational_to_str(c) for c in x]))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_records())

    @classmethod
    def from_records(cls, text: str) -> "QuadratureRule":
        pts, wts = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = [rational_from_str(f) for f in line.split()]
            wts.append(fields[0])
            pts.append(tuple(fields[1:]))
        return cls(pts, wts)


# -- base rules ---------------------------------------------------------------

_SIMPLEX_NAMES = {1: "segment", 2: "triangle", 3: "tetrahedron"}


@lru_cache(maxsize=1)
def _rule_table() -> dict:
    raw = resources.files("jacguard").joinpath("data/rules.json").read_text()
    return json.loads(raw)


@lru_cache(maxsize=None)
def _simplex_rule(s: int, degree: int) -> tuple[tuple[Point, ...], tuple[Fraction, ...]]:
    table = _rule_table()[_SIMPLEX_NAMES[s]]
    d = max(degree, 1)
    if str(d) not in table:
        raise UnsupportedOrder(f"no built-in rule of degree {degree} on the {s}-simplex")
    entry = table[str(d)]
    pts = tuple(tuple(rational_from_str(c) for c in p) for p in entry["points"])
    return pts, tuple(rational_from_str(w) for w in entry["weights"])


def max_base_degree(cls: ElementClass) -> int:
    table = _rule_table()
    degs = [max(int(k) for k in table[_SIMPLEX_NAMES[cls.s]])]
    if cls.n > cls.s:
        degs.append(max(int(k) for k in table["segment"]))
    return min(degs)


@lru_cache(maxsize=None)
def base_rule(cls: ElementClass, degree: int) -> QuadratureRule:
    """Positive rule exact for polynomials of the given degree in each block."""
    factors = [_simplex_rule(cls.s, degree)] + [_simplex_rule(1, degree)] * (cls.n - cls.s)
    pts, wts = [], []
    # simplex block fastest, matching the domain-point ordering
    for combo in product(*[list(zip(*f)) for f in reversed(factors)]):
        parts = list(reversed(combo))
        pts.append(tuple(c for x, _ in parts for c in x))
        w = Fraction(1)
        for _, wx in parts:
            w *= wx
        wts.append(w)
    return QuadratureRule(pts, wts, [AffineMap.identity(cls.n)])


# -- adaptive rule ------------------------------------------------------------

def build_leaves(cls: ElementClass, seq: Sequence[int]) -> list[AffineMap]:
    """Leaves of the partition that refines along ``seq`` (1-based child indices).

    At each level the chosen child is refined further and its siblings are
    leaves; the children of the last chosen cell are all leaves.
    """
    maps = subdivision_maps(cls.static_kind)
    for q in seq:
        if not (isinstance(q, int) and 1 <= q <= len(maps)):
            raise BadSequence(f"child index {q!r} outside 1..{len(maps)}")

    def walk(current: AffineMap, rest: Sequence[int]) -> list[AffineMap]:
        if not rest:
            return [current]
        out = []
        for q, psi in enumerate(maps, start=1):
            child = current.compose(psi)
            out.extend(walk(child, rest[1:]) if q == rest[0] else [child])
        return out

    return walk(AffineMap.identity(cls.n), list(seq))


def build_rule(cls: ElementClass, p: int, leaves: Sequence[AffineMap],
               base_rule_order: int | None = None) -> QuadratureRule:
    """Base rule mapped into every leaf, plus all leaf corners at weight zero."""
    check_order(cls, p)
    degree = 2 * p if base_rule_order is None else base_rule_order
    if degree > max_base_degree(cls):
        raise UnsupportedOrder(f"no base rule of degree {degree} for {cls.name}")
    base = base_rule(cls, degree)
    corners_ref = cls.static_kind.corners()
    pts: list[Point] = []
    wts: list[Fraction] = []
    for leaf in leaves:
        scale = abs(leaf.det())
        pts.extend(leaf.apply_many(base.points))
        wts.extend(w * scale for w in base.weights)
    seen = set()
    for leaf in leaves:
        for x in leaf.apply_many(corners_ref):
            if x not in seen:
                seen.add(x)
                pts.append(x)
                wts.append(Fraction(0))
    return QuadratureRule(pts, wts, list(leaves))


def adaptive_rule(cls: ElementClass, p: int, seq: Sequence[int],
                  base_rule_order: int | None = None) -> QuadratureRule:
    return build_rule(cls, p, build_leaves(cls, seq), base_rule_order)


# -- integration --------------------------------------------------------------

def _as_interval(v) -> Interval:
    if isinstance(v, Interval):
        return v
    if isinstance(v, (Fraction, int)):
        return rat_to_interval(Fraction(v))
    f = float(v)
    return Interval(f, f)


def integrate(rule: QuadratureRule, integrand: Callable[[Point], object]) -> Interval | Divergent:
    """Enclosure of Σ w_i f(x_i); Divergent if f is singular at any rule point.

    The integrand signals a singular point by raising SingularPoint or
    returning None or a non-finite value.  Zero-weight points are evaluated
    like every other point.
    """
    total = Interval(0.0, 0.0)
    for x, w in zip(rule.points, rule.weights):
        try:
            v = integrand(x)
        except SingularPoint as exc:
            return Divergent(x, str(exc) or "integrand singular")
        if v is None:
            return Divergent(x)
        iv = _as_interval(v)
        if not (math.isfinite(iv.lo) and math.isfinite(iv.hi)):
            return Divergent(x, "non-finite value")
        if w:
            total = iv_add(total, iv_mul(rat_to_interval(w), iv))
    return total


def guarded_reciprocal(spec: ElementSpec, time=None) -> Callable[[Point], Interval]:
    """1/|J| evaluated exactly; singular wherever |J| <= 0."""
    def f(x):
        j = exact_jacobian(spec, x, time)
        if j <= 0:
            raise SingularPoint(f"|J| = {j} <= 0")
        return rat_to_interval(1 / j)
    return f


def guarded_log(spec: ElementSpec, time=None) -> Callable[[Point], Interval]:
    """log |J|, widened by two ulps each way; singular wherever |J| <= 0."""
    def f(x):
        j = exact_jacobian(spec, x, time)
        if j <= 0:
            raise SingularPoint(f"|J| = {j} <= 0")
        iv = rat_to_interval(j)
        lo, hi = math.log(iv.lo), math.log(iv.hi)
        for _ in range(2):
            lo, hi = math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)
        return Interval(lo, hi)
    return f
