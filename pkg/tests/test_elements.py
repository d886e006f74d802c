from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from jacguard.elements import (
    CLASSES, MAX_ORDER, AffineMap, BlockOrders, DomainKind, UnsupportedOrder,
    check_order, contains, corner_indices, det_orders, domain_points, geom_orders,
    grid_size, multi_indices, subdivision_maps, term_count, time_subdivision_maps,
)

KINDS = ["segment", "triangle", "quad", "tetrahedron", "prism", "hexahedron",
         "hypercube", "hyperprism1", "hyperprism2"]


def test_geometric_grid_sizes():
    sizes = {name: [grid_size(cls, geom_orders(cls, p)) for p in range(1, MAX_ORDER[name] + 1)]
             for name, cls in CLASSES.items()}
    assert sizes["triangle"] == [3, 6, 10, 15, 21]
    assert sizes["quad"] == [4, 9, 16]
    assert sizes["tetrahedron"] == [4, 10, 20, 35]
    assert sizes["prism"] == [6, 18]
    assert sizes["hexahedron"] == [8, 27]


@pytest.mark.parametrize("name", sorted(CLASSES))
def test_enumerated_grid_matches_closed_form(name):
    cls = CLASSES[name]
    for p in range(1, MAX_ORDER[name] + 1):
        for dynamic in (False, True):
            orders = det_orders(cls, p, dynamic)
            assert grid_size(cls, orders) == term_count(cls, p, dynamic)
            assert len(domain_points(cls, orders)) == grid_size(cls, orders)


def test_dynamic_term_counts_by_enumeration():
    got = {name: [grid_size(cls, det_orders(cls, p, True)) for p in range(1, MAX_ORDER[name] + 1)]
           for name, cls in CLASSES.items()}
    assert got == {"triangle": [3, 18, 45, 84, 135], "quad": [12, 48, 108],
                   "tetrahedron": [4, 80, 336, 880], "prism": [36, 360],
                   "hexahedron": [108, 864]}


def test_enumeration_puts_simplex_first_and_time_last():
    cls = CLASSES["prism"]
    idx = multi_indices(cls, BlockOrders(1, 1, 1))
    assert idx[:4] == [(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0)]
    assert idx[-1] == (0, 1, 1, 1)


def test_zero_order_blocks_have_one_point():
    cls = CLASSES["tetrahedron"]
    assert domain_points(cls, det_orders(cls, 1, False)) == [(0, 0, 0)]


def test_corner_counts():
    for name, expected in [("triangle", 3), ("quad", 4), ("tetrahedron", 4), ("prism", 6), ("hexahedron", 8)]:
        cls = CLASSES[name]
        assert len(corner_indices(cls, det_orders(cls, 2, False))) == expected
        pts = domain_points(cls, det_orders(cls, 2, False))
        assert {pts[i] for i in corner_indices(cls, det_orders(cls, 2, False))} == \
            set(cls.static_kind.corners())


def test_unsupported_orders():
    with pytest.raises(UnsupportedOrder):
        check_order(CLASSES["hexahedron"], 3)
    with pytest.raises(UnsupportedOrder):
        check_order(CLASSES["triangle"], 0)


def test_containment():
    tri, prism = CLASSES["triangle"], CLASSES["prism"]
    assert contains(tri, (Fraction(1, 2), Fraction(1, 2)))
    assert not contains(tri, (Fraction(2, 3), Fraction(1, 2)))
    assert contains(prism, (Fraction(1, 2), Fraction(1, 2), 1))
    assert not contains(prism, (0, 0, Fraction(3, 2)))
    assert not contains(prism, (0, -Fraction(1, 10), 0))


@pytest.mark.parametrize("kind", KINDS)
def test_subdivision_maps_partition_by_volume(kind):
    k = DomainKind.named(kind)
    maps = subdivision_maps(kind)
    assert len(maps) == (4 if k.s == 2 else 8 if k.s == 3 else 2) * 2 ** (k.dim - k.s)
    assert sum(abs(m.det()) for m in maps) == 1
    for m in maps:
        for c in k.corners():
            assert k.contains(m(c))


@pytest.mark.parametrize("kind", KINDS)
def test_subdivision_children_do_not_overlap(kind):
    # the images of a child's interior sample stay inside exactly one child
    k = DomainKind.named(kind)
    maps = subdivision_maps(kind)
    inverses = [m.inverse() for m in maps]
    centre = tuple(sum(c[i] for c in k.corners()) / len(k.corners()) for i in range(k.dim))
    for m in maps:
        x = m(centre)
        owners = [inv for inv in inverses if _strictly_inside(k, inv(x))]
        assert len(owners) == 1


def _strictly_inside(k, x):
    if any(v <= 0 for v in x) or sum(x[:k.s]) >= 1:
        return False
    return all(v < 1 for v in x[k.s:])


def test_tetrahedron_octahedron_split_is_exact():
    maps = subdivision_maps("tetrahedron")
    # the last four children tile the central octahedron, all sharing one diagonal
    diag = {(Fraction(1, 2), 0, 0), (0, Fraction(1, 2), Fraction(1, 2))}
    for m in maps[4:]:
        verts = {m(c) for c in DomainKind.named("tetrahedron").corners()}
        assert diag <= verts


def test_time_maps_halve_the_last_coordinate():
    lower, upper = time_subdivision_maps(3)
    assert lower((Fraction(1, 3), 0, 1)) == (Fraction(1, 3), 0, Fraction(1, 2))
    assert upper((0, 0, 0)) == (0, 0, Fraction(1, 2))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=4))
def test_affine_compose_and_inverse(picks):
    maps = subdivision_maps("triangle")
    m = AffineMap.identity(2)
    for q in picks:
        m = m.compose(maps[q])
    x = (Fraction(1, 7), Fraction(2, 9))
    assert m.inverse()(m(x)) == x
    assert abs(m.det()) == Fraction(1, 4 ** len(picks))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 7), min_size=1, max_size=5),
       st.lists(st.tuples(*[st.fractions(0, 1, max_denominator=50)] * 3), min_size=1, max_size=6))
def test_batched_map_matches_pointwise(picks, points):
    maps = subdivision_maps("tetrahedron")
    m = AffineMap.identity(3)
    for q in picks:
        m = m.compose(maps[q])
    assert m.apply_many(points) == [m(x) for x in points]


def test_product_map_ordering_cycles_simplex_fastest():
    maps = subdivision_maps("prism")
    tri = subdivision_maps("triangle")
    for q, m in enumerate(maps):
        x = (Fraction(1, 5), Fraction(1, 3), Fraction(1, 2))
        assert m(x)[:2] == tri[q % 4](x[:2])
        assert m(x)[2] == (Fraction(1, 4) if q < 4 else Fraction(3, 4))


def test_grid_points_lie_in_domain():
    for name, cls in CLASSES.items():
        for p in (1, 2):
            for x in domain_points(cls, det_orders(cls, p, False)):
                assert contains(cls, x)
