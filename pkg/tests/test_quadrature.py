from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fixtures import zero_corner_triangle, collapsing_triangle
from jacguard.checker import INVALID, INVERSION, check_static, max_valid_step
from jacguard.elements import CLASSES, MAX_ORDER, UnsupportedOrder
from jacguard.jacobian import exact_jacobian
from jacguard.numerics import Interval
from jacguard.quadrature import (
    BadSequence, Divergent, QuadratureRule, SingularPoint, adaptive_rule, base_rule,
    build_leaves, build_rule, guarded_log, guarded_reciprocal, integrate, max_base_degree,
)

TRI = CLASSES["triangle"]


def _monomial_integral(cls, e):
    """Exact integral of ξ^e over the reference domain."""
    from math import factorial
    s = cls.s
    num = 1
    for k in e[:s]:
        num *= factorial(k)
    val = Fraction(num, factorial(sum(e[:s]) + s))
    for k in e[s:]:
        val *= Fraction(1, k + 1)
    return val


@pytest.mark.parametrize("name", sorted(CLASSES))
def test_base_rules_are_exact_to_their_degree(name):
    cls = CLASSES[name]
    for d in range(1, min(max_base_degree(cls), 6) + 1):
        rule = base_rule(cls, d)
        assert all(w > 0 for w in rule.weights)
        for e in np.ndindex(*([d + 1] * cls.n)):
            if sum(e[:cls.s]) > d:
                continue
            got = sum(w * np.prod([x[i] ** e[i] for i in range(cls.n)]) for w, x in zip(rule.weights, rule.points))
            assert got == _monomial_integral(cls, e)


def test_every_class_has_a_degree_2p_rule():
    for name, cls in CLASSES.items():
        assert max_base_degree(cls) >= 2 * MAX_ORDER[name]


def test_leaf_counts():
    assert len(build_leaves(TRI, [])) == 1
    assert len(build_leaves(TRI, [1])) == 4
    leaves = build_leaves(TRI, [1, 4])
    assert len(leaves) == 7
    assert sum(abs(l.det()) for l in leaves) / 2 == Fraction(1, 2)


def test_bad_sequences():
    with pytest.raises(BadSequence):
        build_leaves(TRI, [5])
    with pytest.raises(BadSequence):
        build_leaves(TRI, [0])


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(CLASSES)), st.lists(st.integers(1, 8), max_size=6))
def test_leaves_partition_the_domain(name, seq):
    cls = CLASSES[name]
    q = 4 if cls.s == 2 else 8 if cls.s == 3 else 2
    q *= 2 ** (cls.n - cls.s)
    seq = [(k - 1) % q + 1 for k in seq]
    leaves = build_leaves(cls, seq)
    assert len(leaves) == 1 + (q - 1) * len(seq)
    assert sum(abs(l.det()) for l in leaves) == 1
    rule = build_rule(cls, 1, leaves)
    assert rule.total_weight() == cls.static_kind.volume()
    assert all(w > 0 for w in rule.weights[:rule.weighted])
    corners = cls.static_kind.corners()
    pts = set(rule.points)
    for leaf in leaves:
        assert all(leaf(c) in pts for c in corners)


def test_unsubdivided_triangle_rule():
    rule = build_rule(TRI, 1, build_leaves(TRI, []), 2)
    assert len(rule) == 6 and rule.weighted == 3
    assert rule.total_weight() == Fraction(1, 2)


def test_unsupported_base_degree():
    with pytest.raises(UnsupportedOrder):
        build_rule(TRI, 1, build_leaves(TRI, []), 40)


def test_integrate_constant_and_linear():
    rule = build_rule(TRI, 1, build_leaves(TRI, [2, 3]), 2)
    assert integrate(rule, lambda x: 1).contains(Fraction(1, 2))
    assert integrate(rule, lambda x: x[0]).contains(Fraction(1, 6))
    assert integrate(rule, lambda x: Interval(0.5, 0.5)).contains(Fraction(1, 4))


def test_integrand_signals():
    rule = build_rule(TRI, 1, build_leaves(TRI, []), 2)
    assert isinstance(integrate(rule, lambda x: None), Divergent)
    assert isinstance(integrate(rule, lambda x: float("inf")), Divergent)

    def boom(x):
        raise SingularPoint("nope")
    assert integrate(rule, boom).reason == "nope"


def test_zero_corner_adaptive_rule_diverges_where_the_base_rule_does_not():
    spec = zero_corner_triangle()
    res = check_static(spec)
    assert res.verdict == INVALID
    rule = adaptive_rule(spec.cls, spec.p, res.quad_seq)
    assert isinstance(integrate(rule, guarded_reciprocal(spec)), Divergent)
    assert isinstance(integrate(rule, guarded_log(spec)), Divergent)
    finite = integrate(base_rule(spec.cls, 4), guarded_reciprocal(spec))
    assert isinstance(finite, Interval) and finite.hi < float("inf")


def test_collapse_rule_hits_the_inverted_corner():
    spec = collapsing_triangle()
    res = max_valid_step(spec)
    assert res.verdict == INVERSION
    rule = adaptive_rule(spec.cls, spec.p, res.quad_seq)
    assert any(exact_jacobian(spec, x, res.witness.time) <= 0 for x in rule.points)
    assert isinstance(integrate(rule, guarded_reciprocal(spec, res.witness.time)), Divergent)


def test_records_round_trip(tmp_path):
    rule = adaptive_rule(TRI, 2, [3, 1])
    path = tmp_path / "rule.txt"
    rule.save(path)
    back = QuadratureRule.from_records(path.read_text())
    assert back.points == rule.points and back.weights == rule.weights
