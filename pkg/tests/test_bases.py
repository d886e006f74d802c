import json
import random
from fractions import Fraction

import numpy as np
import pytest

from jacguard.bases import (
    CacheMiss, CorruptCache, MatrixCache, bernstein_eval, block_matrices,
    build_subdivision_matrices, build_transform, lagrange_eval, lagrange_grad_eval,
)
from jacguard.elements import (
    CLASSES, BlockOrders, blocks_for, det_orders, domain_points, geom_orders,
    multi_indices, subdivision_maps, time_subdivision_maps,
)
from jacguard.numerics import RationalMatrix

SMALL = [("triangle", 2), ("quad", 1), ("tetrahedron", 2), ("prism", 1), ("hexahedron", 1)]


@pytest.mark.parametrize("name,p", SMALL + [("triangle", 3), ("quad", 2)])
def test_lagrange_basis_is_nodal(name, p):
    cls = CLASSES[name]
    nodes = domain_points(cls, geom_orders(cls, p))
    for i in range(len(nodes)):
        for j, x in enumerate(nodes):
            assert lagrange_eval(cls, p, i, x) == (1 if i == j else 0)


@pytest.mark.parametrize("name,p", SMALL)
def test_lagrange_gradients_reproduce_linear_maps(name, p):
    cls = CLASSES[name]
    nodes = domain_points(cls, geom_orders(cls, p))
    rng = random.Random(3)
    for _ in range(5):
        x = [Fraction(rng.randint(0, 20), 60) for _ in range(cls.n)]
        grads = [lagrange_grad_eval(cls, p, j, x) for j in range(len(nodes))]
        for a in range(cls.n):
            for b in range(cls.n):
                assert sum(g[b] * nodes[j][a] for j, g in enumerate(grads)) == (1 if a == b else 0)


@pytest.mark.parametrize("name", sorted(CLASSES))
def test_block_matrix_identities(name):
    cls = CLASSES[name]
    for p in (1, 2):
        for block in blocks_for(cls, det_orders(cls, p, True)):
            bm = block_matrices(block)
            k = bm.b2l.rows
            assert bm.l2b @ bm.b2l == RationalMatrix.identity(k)
            for m in (bm.l2b,) + bm.children:
                assert all(r == 1 for r in m.row_sums())


def test_full_transform_for_a_small_grid():
    cls = CLASSES["triangle"]
    b2l, l2b = build_transform(cls, det_orders(cls, 2, True))
    assert b2l.rows == 18
    assert l2b @ b2l == RationalMatrix.identity(18)


def _random_poly(rng, size):
    return [Fraction(rng.randint(-50, 50), rng.randint(1, 9)) for _ in range(size)]


@pytest.mark.parametrize("name,orders", [("triangle", BlockOrders(2, 0)), ("tetrahedron", BlockOrders(1, 0)),
                                         ("prism", BlockOrders(1, 2))])
def test_subdivision_matrices_are_consistent(name, orders):
    cls = CLASSES[name]
    idx = multi_indices(cls, orders)
    children, _ = build_subdivision_matrices(cls, orders)
    maps = subdivision_maps(cls.static_kind)
    rng = random.Random(11)
    for _ in range(10):
        b = _random_poly(rng, len(idx))
        x = tuple(Fraction(rng.randint(0, 10), 40) for _ in range(cls.n))
        for q, (t, psi) in enumerate(zip(children, maps)):
            child = t.matvec(b)
            lhs = sum(c * bernstein_eval(cls, orders, i, x) for c, i in zip(child, idx))
            rhs = sum(c * bernstein_eval(cls, orders, i, psi(x)) for c, i in zip(b, idx))
            assert lhs == rhs


def test_time_halves_are_consistent():
    cls = CLASSES["quad"]
    orders = BlockOrders(1, 1, 2)
    idx = multi_indices(cls, orders)
    _, (lower, upper) = build_subdivision_matrices(cls, orders)
    maps = time_subdivision_maps(3)
    rng = random.Random(5)
    b = _random_poly(rng, len(idx))
    x = (Fraction(1, 3), Fraction(2, 7), Fraction(3, 5))
    for t, psi in zip((lower, upper), maps):
        child = t.matvec(b)
        lhs = sum(c * bernstein_eval(cls, orders, i, x) for c, i in zip(child, idx))
        rhs = sum(c * bernstein_eval(cls, orders, i, psi(x)) for c, i in zip(b, idx))
        assert lhs == rhs


def _exact_apply(ops_blocks, vec, shape, which):
    """Exact per-block mode products on an object array, mirroring DomainOps."""
    x = np.array(vec, dtype=object).reshape((1,) + shape)
    nb = len(ops_blocks)
    for b, bm in enumerate(ops_blocks):
        mats = [bm.l2b] if which == "l2b" else list(bm.children)
        axis = 1 + (nb - 1 - b)
        outs = []
        for m in mats:
            a = np.array(m.entries, dtype=object)
            y = np.tensordot(a, np.moveaxis(x, axis, 0), axes=(1, 0))
            outs.append(np.moveaxis(y, 0, axis))
        x = np.concatenate(outs, axis=0)
    return x.reshape(x.shape[0], -1)


@pytest.mark.parametrize("name,p,dynamic", [("triangle", 2, True), ("tetrahedron", 1, True),
                                            ("hexahedron", 2, True), ("prism", 2, False)])
def test_runtime_operators_enclose_exact_products(name, p, dynamic):
    cls = CLASSES[name]
    cache = MatrixCache()
    ops = cache.for_element(cls, p, dynamic)
    bms = [block_matrices(b) for b in blocks_for(cls, det_orders(cls, p, dynamic))]
    rng = np.random.default_rng(2)
    v = rng.normal(size=ops.N)
    exact_b = _exact_apply(bms, [Fraction(t) for t in v], ops.shape, "l2b")[0]
    lo, hi = ops.to_bezier(v, v)
    for i in range(ops.N):
        assert Fraction(lo[i]) <= exact_b[i] <= Fraction(hi[i])
    exact_c = _exact_apply(bms, [Fraction(t) for t in v], ops.shape, "children")
    clo, chi = ops.subdivide(v, v)
    assert clo.shape == (ops.Q, ops.N)
    picks = [(q, i) for q in range(ops.Q) for i in range(0, ops.N, max(1, ops.N // 40))]
    for q, i in picks:
        assert Fraction(clo[q, i]) <= exact_c[q, i] <= Fraction(chi[q, i])


def test_cache_round_trip(tmp_path):
    cls = CLASSES["triangle"]
    cache = MatrixCache()
    ops = cache.for_element(cls, 2, True)
    cache.gradient_table(cls, 2)
    path = tmp_path / "cache.json"
    cache.save(path)
    loaded = MatrixCache.load(path)
    assert loaded.keys() == cache.keys()
    v = np.linspace(-1, 1, ops.N)
    a = ops.subdivide(v, v)
    b = loaded.lookup(cls, det_orders(cls, 2, True)).subdivide(v, v)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    with pytest.raises(CacheMiss):
        loaded.lookup(cls, det_orders(cls, 3, True))


def test_cache_rejects_tampering(tmp_path):
    cache = MatrixCache()
    cache.for_element(CLASSES["quad"], 1, False)
    path = tmp_path / "cache.json"
    cache.save(path)
    doc = json.loads(path.read_text())
    doc["provenance"] = "0" * 64
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptCache):
        MatrixCache.load(path)
    path.write_text("{not json")
    with pytest.raises(CorruptCache):
        MatrixCache.load(path)
