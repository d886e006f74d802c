"""Lagrange and Bernstein bases, change-of-basis and subdivision matrices.

Every matrix we need factors over the tensor blocks of a domain (simplex
block, one interval per cube coordinate, time), so only small per-block
matrices are built, exactly in rationals, and then rounded outward once.
Full matrices are Kronecker products of the block matrices; they are only
materialized (exactly) for inspection and tests.  At runtime the blocks are
applied as mode products on the coefficient tensor.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from pathlib import Path
from typing import Sequence

import numpy as np

from .elements import (
    Block, BlockOrders, ElementClass, block_indices, block_maps, block_points,
    block_size, blocks_for, check_order, det_orders, element_class,
)
from .numerics import IntervalArray, IntervalMatrix, RationalMatrix, iv_matmul, rat_invert

CACHE_FORMAT = "jacguard-matrix-cache"
CACHE_VERSION = 1


class CorruptCache(ValueError):
    pass


class IoFailure(OSError):
    pass


class CacheMiss(KeyError):
    pass


# -- basis evaluation ---------------------------------------------------------

def _block_bernstein(block: Block, idx: Sequence[int], x: Sequence[Fraction]) -> Fraction:
    m = block.order
    if not block.simplex:
        (i,), (z,) = idx, x
        return comb(m, i) * z ** i * (1 - z) ** (m - i)
    i0 = m - sum(idx)
    x0 = 1 - sum(x, Fraction(0))
    coef = factorial(m) // factorial(i0)
    val = Fraction(1)
    for i, z in zip(idx, x):
        coef //= factorial(i)
        val *= z ** i
    return coef * val * x0 ** i0


def _split(blocks: Sequence[Block], values: Sequence) -> list[tuple]:
    out, at = [], 0
    for b in blocks:
        out.append(tuple(values[at:at + b.dim]))
        at += b.dim
    return out


def bernstein_eval(cls: ElementClass, orders: BlockOrders, index: Sequence[int], point: Sequence) -> Fraction:
    """Exact value of one Bernstein basis function (time is the last coordinate)."""
    blocks = blocks_for(cls, orders)
    pt = [Fraction(x) for x in point]
    val = Fraction(1)
    for b, idx, x in zip(blocks, _split(blocks, index), _split(blocks, pt)):
        val *= _block_bernstein(b, idx, x)
    return val


def _lagrange_factor(q: int, m: int, j: int, z: Fraction) -> tuple[Fraction, Fraction]:
    """Value and derivative of prod_{k in 0..q, k != j} (m z - k) / (j - k)."""
    terms = [(m * z - k, Fraction(m, j - k), Fraction(1, j - k)) for k in range(q + 1) if k != j]
    val = Fraction(1)
    for num, _, inv in terms:
        val *= num * inv
    der = Fraction(0)
    for a, (_, dm, _) in enumerate(terms):
        prod = dm
        for b, (num, _, inv) in enumerate(terms):
            if b != a:
                prod *= num * inv
        der += prod
    return val, der


def lagrange_grad_eval(cls: ElementClass, p: int, index: Sequence[int] | int, point: Sequence) -> tuple[Fraction, ...]:
    """Exact gradient of the order-p geometric Lagrange basis function ``index``.

    ``index`` is a multi-index or a position in the canonical geometric grid.
    """
    check_order(cls, p)
    if isinstance(index, int):
        index = _geom_multi(cls, p)[index]
    pt = [Fraction(x) for x in point]
    n, s = cls.n, cls.s
    # factors: (value, derivative, coordinate gradient)
    factors = []
    simplex_idx = index[:s]
    i0 = p - sum(simplex_idx)
    for d, i in enumerate(simplex_idx):
        v, dv = _lagrange_factor(i, p, i, pt[d])
        factors.append((v, dv, {d: 1}))
    v, dv = _lagrange_factor(i0, p, i0, 1 - sum(pt[:s], Fraction(0)))
    factors.append((v, dv, {d: -1 for d in range(s)}))
    for d in range(s, n):
        v, dv = _lagrange_factor(p, p, index[d], pt[d])
        factors.append((v, dv, {d: 1}))
    grad = [Fraction(0)] * n
    for a, (_, dv, cg) in enumerate(factors):
        if not dv:
            continue
        rest = dv
        for b, (v, _, _) in enumerate(factors):
            if b != a:
                rest *= v
                if not rest:
                    break
        if rest:
            for d, sign in cg.items():
                grad[d] += sign * rest
    return tuple(grad)


def lagrange_eval(cls: ElementClass, p: int, index: Sequence[int] | int, point: Sequence) -> Fraction:
    if isinstance(index, int):
        index = _geom_multi(cls, p)[index]
    pt = [Fraction(x) for x in point]
    s = cls.s
    val = Fraction(1)
    for d, i in enumerate(index[:s]):
        val *= _lagrange_factor(i, p, i, pt[d])[0]
    i0 = p - sum(index[:s])
    val *= _lagrange_factor(i0, p, i0, 1 - sum(pt[:s], Fraction(0)))[0]
    for d in range(s, cls.n):
        val *= _lagrange_factor(p, p, index[d], pt[d])[0]
    return val


@lru_cache(maxsize=None)
def _geom_multi(cls: ElementClass, p: int):
    from .elements import multi_indices
    return tuple(multi_indices(cls, BlockOrders(p, p, 0)))


# -- exact block matrices -----------------------------------------------------

@dataclass(frozen=True)
class BlockMatrices:
    block: Block
    b2l: RationalMatrix
    l2b: RationalMatrix
    children: tuple[RationalMatrix, ...]


@lru_cache(maxsize=None)
def block_matrices(block: Block) -> BlockMatrices:
    idx = block_indices(block)
    pts = block_points(block)
    b2l = RationalMatrix([[_block_bernstein(block, j, g) for j in idx] for g in pts])
    l2b = rat_invert(b2l)
    children = []
    for psi in block_maps(block):
        sampled = RationalMatrix([[_block_bernstein(block, j, psi(g)) for j in idx] for g in pts])
        children.append(l2b @ sampled)
    return BlockMatrices(block, b2l, l2b, tuple(children))


def _kron_all(mats: Sequence[RationalMatrix]) -> RationalMatrix:
    out = mats[0]
    for m in mats[1:]:
        out = m.kron(out)
    return out


def build_transform(cls: ElementClass, orders: BlockOrders) -> tuple[RationalMatrix, RationalMatrix]:
    """Exact (T_B→L, T_L→B) of the full grid."""
    bms = [block_matrices(b) for b in blocks_for(cls, orders)]
    return _kron_all([b.b2l for b in bms]), _kron_all([b.l2b for b in bms])


def build_subdivision_matrices(cls: ElementClass, orders: BlockOrders):
    """Exact full matrices ([T^1..T^Q], (T^-, T^+)); T^± is None for static grids."""
    blocks = blocks_for(cls, orders)
    bms = [block_matrices(b) for b in blocks]
    counts = [len(b.children) for b in bms]
    out = []
    for q in range(int(np.prod(counts))):
        picks, rem = [], q
        for bm, c in zip(bms, counts):
            picks.append(bm.children[rem % c])
            rem //= c
        out.append(_kron_all(picks))
    time = None
    if orders.time > 0:
        eye = [RationalMatrix.identity(block_size(b)) for b in blocks[:-1]]
        tb = bms[-1]
        time = (_kron_all(eye + [tb.children[0]]), _kron_all(eye + [tb.children[1]]))
    return out, time


# -- runtime operators --------------------------------------------------------

def _stack(mats: Sequence[RationalMatrix]) -> IntervalMatrix:
    ivs = [m.to_interval() for m in mats]
    return IntervalMatrix(np.vstack([m.lo for m in ivs]), np.vstack([m.hi for m in ivs]))


@dataclass
class BlockOps:
    block: Block
    l2b: IntervalMatrix
    children: IntervalMatrix  # stacked (C*K, K)
    count: int


def block_ops(block: Block) -> BlockOps:
    bm = block_matrices(block)
    return BlockOps(block, bm.l2b.to_interval(), _stack(bm.children), len(bm.children))


def _mode(lo: np.ndarray, hi: np.ndarray, mat: IntervalMatrix, axis: int, cb: int):
    """Apply ``mat`` (cb*k x k) along ``axis``; new child index goes slowest."""
    xl = np.moveaxis(lo, axis, 0)
    shp = xl.shape
    k = shp[0]
    x = IntervalArray(xl.reshape(k, -1), np.moveaxis(hi, axis, 0).reshape(k, -1))
    y = iv_matmul(mat, x)

    def back(a):
        a = a.reshape((cb, k) + shp[1:])
        a = np.moveaxis(a, 1, axis + 1)
        return a.reshape((cb * a.shape[1],) + a.shape[2:])

    return back(y.lo), back(y.hi)


# operators with at most this many entries are applied as a single product
FULL_LIMIT = 250_000


class DomainOps:
    """Interval operators for one (class, orders) grid."""

    def __init__(self, cls: ElementClass, orders: BlockOrders, blocks: Sequence[BlockOps]):
        self.cls = cls
        self.orders = orders
        self.dynamic = orders.time > 0
        self.blocks = list(blocks)
        self.sizes = [b.l2b.shape[0] for b in self.blocks]
        self.shape = tuple(reversed(self.sizes))
        self.N = int(np.prod(self.sizes))
        self.Q = int(np.prod([b.count for b in self.blocks]))
        self.Q_spatial = self.Q // (2 if self.dynamic else 1)
        self._full_cache: dict = {}

    def _axis(self, b: int) -> int:
        return 1 + (len(self.blocks) - 1 - b)

    def _run(self, lo, hi, steps):
        lo = np.asarray(lo, dtype=float).reshape((-1,) + self.shape)
        hi = np.asarray(hi, dtype=float).reshape((-1,) + self.shape)
        for b, mat, cb in steps:
            lo, hi = _mode(lo, hi, mat, self._axis(b), cb)
        return lo.reshape(lo.shape[0], self.N), hi.reshape(hi.shape[0], self.N)

    def _steps(self, kind):
        if kind == "l2b":
            return [(b, ops.l2b, 1) for b, ops in enumerate(self.blocks)]
        if kind == "children":
            return [(b, ops.children, ops.count) for b, ops in enumerate(self.blocks)]
        b = len(self.blocks) - 1
        return [(b, self.blocks[b].children, 2)]

    def _full(self, kind) -> IntervalMatrix | None:
        """Whole operator as one stacked matrix, for grids small enough to afford it.

        Built by pushing the unit vectors through the per-block products, so
        it encloses the same exact operator as the factored form.
        """
        if kind not in self._full_cache:
            mat = None
            count = {"l2b": 1, "children": self.Q, "time": 2}[kind]
            if count * self.N * self.N <= FULL_LIMIT:
                eye = np.eye(self.N)
                lo, hi = self._run(eye, eye, self._steps(kind))
                # row q*N + j holds T^q e_j
                lo = lo.reshape(count, self.N, self.N).transpose(0, 2, 1).reshape(count * self.N, self.N)
                hi = hi.reshape(count, self.N, self.N).transpose(0, 2, 1).reshape(count * self.N, self.N)
                mat = IntervalMatrix(lo, hi)
            self._full_cache[kind] = mat
        return self._full_cache[kind]

    def _apply(self, lo, hi, kind):
        mat = self._full(kind)
        if mat is None:
            return self._run(lo, hi, self._steps(kind))
        y = iv_matmul(mat, IntervalArray(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)))
        return y.lo.reshape(-1, self.N), y.hi.reshape(-1, self.N)

    def to_bezier(self, lo, hi):
        lo, hi = self._apply(lo, hi, "l2b")
        return lo[0], hi[0]

    def subdivide(self, lo, hi):
        """Bézier coefficients on all Q children, shape (Q, N)."""
        return self._apply(lo, hi, "children")

    def time_halves(self, lo, hi):
        if not self.dynamic:
            raise ValueError("static grids have no time direction")
        return self._apply(lo, hi, "time")


def _provenance() -> str:
    here = Path(__file__).parent
    h = hashlib.sha256()
    for name in ("numerics.py", "elements.py", "bases.py"):
        h.update((here / name).read_bytes())
    return h.hexdigest()


def _cache_key(cls: ElementClass, orders: BlockOrders) -> str:
    return f"{cls.name}:{orders.simplex}:{orders.tensor}:{orders.time}"


def _im_to_json(m: IntervalMatrix) -> dict:
    return {"rows": m.shape[0], "cols": m.shape[1],
            "lo": [x.hex() for x in m.lo.ravel().tolist()],
            "hi": [x.hex() for x in m.hi.ravel().tolist()]}


def _im_from_json(d: dict, rows: int, cols: int) -> IntervalMatrix:
    if d["rows"] != rows or d["cols"] != cols:
        raise CorruptCache(f"matrix is {d['rows']}x{d['cols']}, expected {rows}x{cols}")
    if len(d["lo"]) != rows * cols or len(d["hi"]) != rows * cols:
        raise CorruptCache("matrix entry count does not match its shape")
    lo = np.array([float.fromhex(x) for x in d["lo"]]).reshape(rows, cols)
    hi = np.array([float.fromhex(x) for x in d["hi"]]).reshape(rows, cols)
    if not np.all(lo <= hi):
        raise CorruptCache("interval with lo > hi")
    return IntervalMatrix(lo, hi)


class MatrixCache:
    """Per-grid interval operators, built on first use."""

    def __init__(self):
        self._ops: dict[str, DomainOps] = {}
        self._blocks: dict[str, BlockOps] = {}
        self._grads: dict = {}
        self._lock = threading.Lock()
        self.provenance = _provenance()

    def _block(self, block: Block) -> BlockOps:
        ops = self._blocks.get(block.key)
        if ops is None:
            ops = block_ops(block)
            self._blocks[block.key] = ops
        return ops

    def ops(self, cls: ElementClass, orders: BlockOrders) -> DomainOps:
        key = _cache_key(cls, orders)
        ops = self._ops.get(key)
        if ops is None:
            with self._lock:
                ops = self._ops.get(key)
                if ops is None:
                    ops = DomainOps(cls, orders, [self._block(b) for b in blocks_for(cls, orders)])
                    self._ops[key] = ops
        return ops

    def for_element(self, cls: ElementClass, p: int, dynamic: bool) -> DomainOps:
        return self.ops(cls, det_orders(cls, p, dynamic))

    def lookup(self, cls: ElementClass, orders: BlockOrders) -> DomainOps:
        key = _cache_key(cls, orders)
        if key not in self._ops:
            raise CacheMiss(key)
        return self._ops[key]

    def gradient_table(self, cls: ElementClass, p: int):
        key = (cls.name, p)
        tab = self._grads.get(key)
        if tab is None:
            from .jacobian import build_gradient_table
            with self._lock:
                tab = self._grads.get(key)
                if tab is None:
                    tab = build_gradient_table(cls, p)
                    self._grads[key] = tab
        return tab

    def keys(self) -> list[str]:
        return sorted(self._ops)

    # -- persistence --

    def save(self, path) -> None:
        entries = {}
        for key, ops in sorted(self._ops.items()):
            entries[key] = [
                {"block": b.block.key, "l2b": _im_to_json(b.l2b), "children": _im_to_json(b.children)}
                for b in ops.blocks
            ]
        grads = {}
        for (name, p), tab in sorted(self._grads.items()):
            grads[f"{name}:{p}"] = _im_to_json(tab.matrix)
        doc = {"format": CACHE_FORMAT, "version": CACHE_VERSION,
               "provenance": self.provenance, "entries": entries, "gradients": grads}
        try:
            Path(path).write_text(json.dumps(doc, separators=(",", ":")))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "MatrixCache":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptCache(f"unreadable cache: {exc}") from exc
        cache = cls()
        try:
            if doc.get("format") != CACHE_FORMAT or doc.get("version") != CACHE_VERSION:
                raise CorruptCache("not a matrix cache of a supported version")
            if doc.get("provenance") != cache.provenance:
                raise CorruptCache("cache was generated by different code")
            for key, blocks in doc["entries"].items():
                name, ms, mt, mtime = key.split(":")
                ecls = element_class(name)
                orders = BlockOrders(int(ms), int(mt), int(mtime))
                expected = blocks_for(ecls, orders)
                if len(blocks) != len(expected):
                    raise CorruptCache(f"entry {key} has the wrong number of blocks")
                ops = []
                for blk, d in zip(expected, blocks):
                    if d["block"] != blk.key:
                        raise CorruptCache(f"entry {key} lists block {d['block']}, expected {blk.key}")
                    k = block_size(blk)
                    count = len(block_maps(blk))
                    bo = cache._blocks.get(blk.key)
                    if bo is None:
                        bo = BlockOps(blk, _im_from_json(d["l2b"], k, k),
                                      _im_from_json(d["children"], count * k, k), count)
                        cache._blocks[blk.key] = bo
                    ops.append(bo)
                cache._ops[key] = DomainOps(ecls, orders, ops)
            from .jacobian import GradientTable, gradient_shape
            for key, d in doc.get("gradients", {}).items():
                name, p = key.split(":")
                ecls, p = element_class(name), int(p)
                rows, cols = gradient_shape(ecls, p)
                cache._grads[(name, p)] = GradientTable(ecls, p, _im_from_json(d, rows, cols))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CorruptCache):
                raise
            raise CorruptCache(f"malformed cache: {exc}") from exc
        return cache


_default_cache: MatrixCache | None = None


def default_cache() -> MatrixCache:
    global _default_cache
    if _default_cache is None:
        _default_cache = MatrixCache()
    return _default_cache
