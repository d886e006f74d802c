"""Reference domains, domain-point grids and subdivision maps.

A reference domain is the tensor product of an s-simplex with an
(n-s)-cube.  Coordinates are ordered simplex first, then cube; for dynamic
elements time is appended as one more cube coordinate.

Multi-indices are enumerated block by block.  Within the simplex block the
first component varies fastest; the simplex block varies fastest overall,
followed by each cube coordinate and finally time.  This ordering fixes the
layout of coefficient vectors, control points and matrices everywhere.
"""

from __future__ import annotations

import math

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb
from typing import Sequence

Point = tuple[Fraction, ...]


class UnsupportedOrder(ValueError):
    pass


@dataclass(frozen=True)
class ElementClass:
    name: str
    n: int
    s: int

    @property
    def static_kind(self) -> "DomainKind":
        return DomainKind.of(self.s, self.n)

    @property
    def dynamic_kind(self) -> "DomainKind":
        return DomainKind.of(self.s, self.n + 1)


CLASSES = {
    "triangle": ElementClass("triangle", 2, 2),
    "quad": ElementClass("quad", 2, 1),
    "tetrahedron": ElementClass("tetrahedron", 3, 3),
    "prism": ElementClass("prism", 3, 2),
    "hexahedron": ElementClass("hexahedron", 3, 1),
}

# highest geometric order accepted per class
MAX_ORDER = {"triangle": 5, "quad": 3, "tetrahedron": 4, "prism": 2, "hexahedron": 2}


def element_class(name: str) -> ElementClass:
    try:
        return CLASSES[name]
    except KeyError:
        raise ValueError(f"unknown element class {name!r}") from None


def check_order(cls: ElementClass, p: int) -> None:
    if not isinstance(p, int) or p < 1 or p > MAX_ORDER[cls.name]:
        raise UnsupportedOrder(f"{cls.name} of order {p} is not supported "
                               f"(1..{MAX_ORDER[cls.name]})")


@dataclass(frozen=True)
class BlockOrders:
    simplex: int
    tensor: int
    time: int = 0


def det_orders(cls: ElementClass, p: int, dynamic: bool) -> BlockOrders:
    """Per-block polynomial orders of the Jacobian determinant."""
    check_order(cls, p)
    return BlockOrders(cls.n * p - cls.s, cls.n * p - 1, cls.n if dynamic else 0)


def geom_orders(cls: ElementClass, p: int) -> BlockOrders:
    check_order(cls, p)
    return BlockOrders(p, p, 0)


@dataclass(frozen=True)
class Block:
    """One tensor factor: a simplex of dimension ``dim`` or a unit interval."""
    simplex: bool
    dim: int
    order: int

    @property
    def key(self) -> str:
        return f"{'S' if self.simplex else 'I'}{self.dim}o{self.order}"


def blocks_for(cls: ElementClass, orders: BlockOrders, dynamic: bool | None = None) -> tuple[Block, ...]:
    if dynamic is None:
        dynamic = orders.time > 0
    out = [Block(True, cls.s, orders.simplex)]
    out += [Block(False, 1, orders.tensor)] * (cls.n - cls.s)
    if dynamic:
        out.append(Block(False, 1, orders.time))
    return tuple(out)


@lru_cache(maxsize=None)
def block_indices(block: Block) -> tuple[tuple[int, ...], ...]:
    """Multi-indices of one block, first component fastest."""
    m = block.order
    if not block.simplex:
        return tuple((i,) for i in range(m + 1))
    out = []
    for rev in product(range(m + 1), repeat=block.dim):
        idx = rev[::-1]
        if sum(idx) <= m:
            out.append(idx)
    return tuple(out)


@lru_cache(maxsize=None)
def block_points(block: Block) -> tuple[Point, ...]:
    m = block.order
    if m == 0:
        return tuple(tuple(Fraction(0) for _ in range(block.dim)) for _ in block_indices(block))
    return tuple(tuple(Fraction(i, m) for i in idx) for idx in block_indices(block))


def block_size(block: Block) -> int:
    if block.simplex:
        return comb(block.order + block.dim, block.dim)
    return block.order + 1


@lru_cache(maxsize=None)
def block_corners(block: Block) -> tuple[int, ...]:
    """Positions (within the block) of indices sitting on the block's vertices."""
    m = block.order
    idx = block_indices(block)
    if m == 0:
        return (0,)
    if not block.simplex:
        return (0, m)
    verts = [tuple(0 for _ in range(block.dim))]
    for k in range(block.dim):
        verts.append(tuple(m if j == k else 0 for j in range(block.dim)))
    return tuple(idx.index(v) for v in verts)


def multi_indices(cls: ElementClass, orders: BlockOrders) -> list[tuple[int, ...]]:
    blocks = blocks_for(cls, orders)
    parts = [block_indices(b) for b in blocks]
    out = []
    for combo in product(*reversed(parts)):
        full: tuple[int, ...] = ()
        for part in reversed(combo):
            full += part
        out.append(full)
    return out


@lru_cache(maxsize=None)
def _domain_points(cls: ElementClass, orders: BlockOrders) -> tuple[Point, ...]:
    blocks = blocks_for(cls, orders)
    parts = [block_points(b) for b in blocks]
    out = []
    for combo in product(*reversed(parts)):
        full: Point = ()
        for part in reversed(combo):
            full += part
        out.append(full)
    return tuple(out)


def domain_points(cls: ElementClass, orders: BlockOrders) -> list[Point]:
    """Grid points in canonical order (time last when dynamic)."""
    return list(_domain_points(cls, orders))


def grid_size(cls: ElementClass, orders: BlockOrders) -> int:
    size = 1
    for b in blocks_for(cls, orders):
        size *= block_size(b)
    return size


def term_count(cls: ElementClass, p: int, dynamic: bool) -> int:
    """Closed-form N = C(np, s) (np)^(n-s), times n+1 when dynamic."""
    n, s = cls.n, cls.s
    N = comb(n * p, s) * (n * p) ** (n - s)
    return N * (n + 1) if dynamic else N


@lru_cache(maxsize=None)
def _corner_indices(cls: ElementClass, orders: BlockOrders, at_end_time: bool) -> tuple[int, ...]:
    blocks = blocks_for(cls, orders)
    sizes = [block_size(b) for b in blocks]
    choices = []
    for b in blocks[:1 + cls.n - cls.s]:
        choices.append(block_corners(b))
    if orders.time > 0:
        tb = blocks[-1]
        choices.append((tb.order,) if at_end_time else (0, tb.order))
    out = []
    for combo in product(*reversed(choices)):
        pos = 0
        for c, size in zip(combo, reversed(sizes)):
            pos = pos * size + c
        out.append(pos)
    return tuple(sorted(out))


def corner_indices(cls: ElementClass, orders: BlockOrders, at_end_time: bool = True) -> list[int]:
    return list(_corner_indices(cls, orders, at_end_time))


def contains(cls: ElementClass, point: Sequence) -> bool:
    if len(point) != cls.n:
        raise ValueError(f"expected a {cls.n}-dimensional point")
    return DomainKind.of(cls.s, cls.n).contains(point)


# -- affine maps --------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    matrix: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(tuple(tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d)),
                   tuple(Fraction(0) for _ in range(d)))

    @property
    def dim(self) -> int:
        return len(self.offset)

    def __call__(self, point: Sequence) -> Point:
        return tuple(
            sum((a * Fraction(x) for a, x in zip(row, point)), Fraction(0)) + b
            for row, b in zip(self.matrix, self.offset)
        )

    def apply_many(self, points: Sequence[Sequence]) -> list[Point]:
        """Images of many points, in integer arithmetic over common denominators."""
        entries = [a for row in self.matrix for a in row] + list(self.offset)
        den = math.lcm(*(Fraction(a).denominator for a in entries))
        mat = [[int(Fraction(a) * den) for a in row] for row in self.matrix]
        off = [int(Fraction(b) * den) for b in self.offset]
        pts = [[x if type(x) is Fraction else Fraction(x) for x in pt] for pt in points]
        if not pts:
            return []
        scale = math.lcm(*(x.denominator for pt in pts for x in pt))
        ints = [[x.numerator * (scale // x.denominator) for x in pt] for pt in pts]
        total = den * scale
        return [
            tuple(Fraction(sum(a * x for a, x in zip(row, xs)) + b * scale, total)
                  for row, b in zip(mat, off))
            for xs in ints
        ]

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """``self ∘ inner``."""
        d = self.dim
        mat = tuple(
            tuple(sum((self.matrix[i][k] * inner.matrix[k][j] for k in range(d)), Fraction(0))
                  for j in range(d))
            for i in range(d)
        )
        off = self(inner.offset)
        return AffineMap(mat, off)

    def det(self) -> Fraction:
        return _det(self.matrix)

    def restrict(self, d: int) -> "AffineMap":
        """Leading ``d`` coordinates, valid when they do not depend on the rest."""
        if any(self.matrix[i][j] for i in range(d) for j in range(d, self.dim)):
            raise ValueError("map mixes the retained coordinates with the dropped ones")
        return AffineMap(tuple(row[:d] for row in self.matrix[:d]), self.offset[:d])

    def inverse(self) -> "AffineMap":
        inv = _inv(self.matrix)
        off = tuple(-sum((inv[i][k] * self.offset[k] for k in range(self.dim)), Fraction(0))
                    for i in range(self.dim))
        return AffineMap(inv, off)


def _det(m) -> Fraction:
    m = [list(r) for r in m]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                for k in range(c, n):
                    m[r][k] -= f * m[c][k]
    return det


def _inv(m):
    from .numerics import RationalMatrix, rat_invert
    return rat_invert(RationalMatrix(m)).entries


def _affine(rows: Sequence[tuple[Sequence, object]]) -> AffineMap:
    """Build a map from rows of (linear coefficients, constant), halved."""
    half = Fraction(1, 2)
    return AffineMap(tuple(tuple(Fraction(c) * half for c in lin) for lin, _ in rows),
                     tuple(Fraction(b) * half for _, b in rows))


def _simplex_maps(s: int) -> list[AffineMap]:
    if s == 1:
        return [_affine([((1,), 0)]), _affine([((1,), 1)])]
    if s == 2:
        return [
            _affine([((1, 0), 0), ((0, 1), 0)]),
            _affine([((1, 0), 1), ((0, 1), 0)]),
            _affine([((1, 0), 0), ((0, 1), 1)]),
            _affine([((-1, 0), 1), ((0, -1), 1)]),
        ]
    if s == 3:
        return [
            _affine([((1, 0, 0), 0), ((0, 1, 0), 0), ((0, 0, 1), 0)]),
            _affine([((1, 0, 0), 1), ((0, 1, 0), 0), ((0, 0, 1), 0)]),
            _affine([((1, 0, 0), 0), ((0, 1, 0), 1), ((0, 0, 1), 0)]),
            _affine([((1, 0, 0), 0), ((0, 1, 0), 0), ((0, 0, 1), 1)]),
            # central octahedron, split around the diagonal (1/2,0,0)-(0,1/2,1/2)
            _affine([((0, -1, -1), 1), ((0, 1, 0), 0), ((1, 1, 1), 0)]),
            _affine([((0, -1, 0), 1), ((1, 1, 0), 0), ((0, 1, 1), 0)]),
            _affine([((1, 1, 0), 0), ((-1, 0, 0), 1), ((0, 0, 1), 0)]),
            _affine([((1, 0, 0), 0), ((0, 1, 1), 0), ((-1, -1, 0), 1)]),
        ]
    raise ValueError(f"no simplex subdivision for dimension {s}")


def _interval_maps() -> list[AffineMap]:
    return _simplex_maps(1)


def block_maps(block: Block) -> list[AffineMap]:
    return _simplex_maps(block.dim) if block.simplex else _interval_maps()


def _product_map(parts: Sequence[AffineMap]) -> AffineMap:
    d = sum(p.dim for p in parts)
    rows, off = [], []
    at = 0
    for p in parts:
        for i in range(p.dim):
            row = [Fraction(0)] * d
            row[at:at + p.dim] = p.matrix[i]
            rows.append(tuple(row))
            off.append(p.offset[i])
        at += p.dim
    return AffineMap(tuple(rows), tuple(off))


_KIND_NAMES = {
    (2, 2): "triangle", (1, 2): "quad", (3, 3): "tetrahedron",
    (2, 3): "prism", (1, 3): "hexahedron", (1, 4): "hypercube",
    (3, 4): "hyperprism1", (2, 4): "hyperprism2", (1, 1): "segment",
}


@dataclass(frozen=True)
class DomainKind:
    """Product of an s-simplex with a (dim-s)-cube; names follow the element zoo."""
    s: int
    dim: int

    @classmethod
    def of(cls, s: int, dim: int) -> "DomainKind":
        if (s, dim) not in _KIND_NAMES:
            raise ValueError(f"unsupported domain ({s}, {dim})")
        return cls(s, dim)

    @classmethod
    def named(cls, name: str) -> "DomainKind":
        for key, val in _KIND_NAMES.items():
            if val == name:
                return cls(*key)
        raise ValueError(f"unknown domain kind {name!r}")

    @property
    def name(self) -> str:
        return _KIND_NAMES[(self.s, self.dim)]

    def blocks(self) -> list[Block]:
        return [Block(True, self.s, 1)] + [Block(False, 1, 1)] * (self.dim - self.s)

    def contains(self, point: Sequence) -> bool:
        pt = [Fraction(x) for x in point]
        if len(pt) != self.dim or any(x < 0 for x in pt):
            return False
        if sum(pt[:self.s], Fraction(0)) > 1:
            return False
        return all(x <= 1 for x in pt[self.s:])

    def volume(self) -> Fraction:
        from math import factorial
        return Fraction(1, factorial(self.s))

    def corners(self) -> list[Point]:
        simplex = [tuple(Fraction(0) for _ in range(self.s))]
        simplex += [tuple(Fraction(int(j == k)) for j in range(self.s)) for k in range(self.s)]
        out = []
        for combo in product(*([(Fraction(0), Fraction(1))] * (self.dim - self.s)), simplex):
            out.append(combo[-1] + tuple(reversed(combo[:-1])))
        return out


@lru_cache(maxsize=None)
def _subdivision_maps(kind: DomainKind) -> tuple[AffineMap, ...]:
    per_block = [block_maps(b) for b in kind.blocks()]
    out = []
    for combo in product(*reversed(per_block)):
        out.append(_product_map(list(reversed(combo))))
    return tuple(out)


def subdivision_maps(kind: DomainKind | str) -> list[AffineMap]:
    """Maps ψ^1..ψ^Q of a domain kind; the simplex factor cycles fastest."""
    if isinstance(kind, str):
        kind = DomainKind.named(kind)
    return list(_subdivision_maps(kind))


def time_subdivision_maps(dim: int) -> tuple[AffineMap, AffineMap]:
    """(ψ⁻, ψ⁺) on a domain of total dimension ``dim`` whose last coordinate is time."""
    ident = AffineMap.identity(dim - 1)
    lower, upper = _interval_maps()
    return _product_map([ident, lower]), _product_map([ident, upper])


@dataclass(frozen=True)
class TimeSpan:
    t_lo: Fraction
    t_hi: Fraction

    def __post_init__(self):
        if not (0 <= self.t_lo < self.t_hi <= 1):
            raise ValueError(f"bad time span [{self.t_lo}, {self.t_hi}]")

    def halves(self) -> tuple["TimeSpan", "TimeSpan"]:
        mid = (self.t_lo + self.t_hi) / 2
        return TimeSpan(self.t_lo, mid), TimeSpan(mid, self.t_hi)
