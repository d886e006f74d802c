import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jacguard.numerics import (
    Interval, IntervalArray, IntervalMatrix, RationalMatrix, SingularMatrix,
    add_down, add_up, det_exact, det_interval, det_interval_mr, iv_add, iv_cmp_gt,
    iv_matmul, iv_mul, mid_rad, mul_down, mul_up, rat_invert, rat_to_interval,
    rational_from_str, rational_to_str,
)

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e150, max_value=1e150)
small = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e3, max_value=1e3)


@given(finite, finite)
def test_directed_sums_bracket_exact(a, b):
    exact = Fraction(a) + Fraction(b)
    assert Fraction(add_down(a, b)) <= exact <= Fraction(add_up(a, b))


@given(finite, finite)
def test_directed_products_bracket_exact(a, b):
    exact = Fraction(a) * Fraction(b)
    assert Fraction(mul_down(a, b)) <= exact <= Fraction(mul_up(a, b))


def test_tiny_products_round_outward():
    a = b = 1e-200
    exact = Fraction(a) * Fraction(b)
    assert Fraction(mul_down(a, b)) < exact < Fraction(mul_up(a, b))


@given(small, small, small, small)
def test_interval_ops_contain_pointwise_results(a, b, c, d):
    x = Interval(min(a, b), max(a, b))
    y = Interval(min(c, d), max(c, d))
    for u in (x.lo, x.hi):
        for v in (y.lo, y.hi):
            assert iv_add(x, y).contains(Fraction(u) + Fraction(v))
            assert iv_mul(x, y).contains(Fraction(u) * Fraction(v))


def test_comparison_is_certain_only_when_disjoint():
    assert iv_cmp_gt(Interval(2, 3), Interval(0, 1))
    assert not iv_cmp_gt(Interval(0.5, 3), Interval(0, 1))


@given(st.fractions(min_value=-10**6, max_value=10**6, max_denominator=10**9))
def test_rational_conversion_is_tight(q):
    iv = rat_to_interval(q)
    assert iv.contains(q)
    assert iv.hi == iv.lo or math.nextafter(iv.lo, math.inf) == iv.hi


@given(st.fractions(max_denominator=10**12))
def test_rational_strings_round_trip(q):
    assert rational_from_str(rational_to_str(q)) == q


def test_hex_round_trip_is_bit_exact():
    iv = Interval(0.1, 0.30000000000000004)
    assert Interval.from_hex(*iv.to_hex()) == iv


def test_rational_inverse():
    a = RationalMatrix([[2, 1, 0], [1, 3, 1], [0, 1, 4]])
    assert a @ rat_invert(a) == RationalMatrix.identity(3)
    with pytest.raises(SingularMatrix):
        rat_invert(RationalMatrix([[1, 2], [2, 4]]))


def test_kron_puts_the_other_factor_fastest():
    a = RationalMatrix([[1, 2], [3, 4]])
    b = RationalMatrix([[0, 1], [1, 0]])
    k = a.kron(b)
    assert k[0, 1] == 1 and k[0, 3] == 2 and k[2, 1] == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_matmul_encloses_exact_product(k, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(k, m)) * 10.0 ** rng.integers(-8, 8, size=(k, m))
    w = np.abs(rng.normal(size=(k, m))) * 1e-3
    x = rng.normal(size=(m, 2)) * 10.0 ** rng.integers(-8, 8, size=(m, 2))
    A = IntervalMatrix(a - w, a + w)
    y = iv_matmul(A, IntervalArray.exact(x))
    for i in range(k):
        for j in range(2):
            for corner in (a - w, a + w, a):
                exact = sum(Fraction(corner[i, l]) * Fraction(x[l, j]) for l in range(m))
                assert Fraction(y.lo[i, j]) <= exact <= Fraction(y.hi[i, j])


def test_matmul_widens_overflow_to_everything():
    A = IntervalMatrix(np.array([[1e308, 1e308]]))
    y = iv_matmul(A, IntervalArray.exact(np.array([1e308, 1e308])))
    assert y.lo[0] == -math.inf and y.hi[0] == math.inf


@settings(max_examples=80, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(0, 2**32 - 1))
def test_determinant_enclosures_contain_exact_value(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n, 4)) * 10.0 ** rng.integers(-5, 5, size=(n, n, 4))
    rows = [[IntervalArray.exact(m[a, b]) for b in range(n)] for a in range(n)]
    for enclose in (det_interval, det_interval_mr):
        d = enclose(rows)
        for i in range(4):
            exact = det_exact([[Fraction(m[a, b, i]) for b in range(n)] for a in range(n)])
            assert Fraction(d.lo[i]) <= exact <= Fraction(d.hi[i])


def test_singular_cancellation_keeps_sign_unknown():
    third = 1 / 3
    rows = [[IntervalArray.exact(np.array([third])), IntervalArray.exact(np.array([1.0]))],
            [IntervalArray.exact(np.array([1.0])), IntervalArray.exact(np.array([3.0]))]]
    d = det_interval_mr(rows)
    exact = Fraction(third) * 3 - 1
    assert Fraction(d.lo[0]) <= exact <= Fraction(d.hi[0])


@given(small, small)
def test_mid_rad_covers_interval(a, b):
    lo, hi = np.array([min(a, b)]), np.array([max(a, b)])
    m, r = mid_rad(lo, hi)
    assert Fraction(m[0]) - Fraction(r[0]) <= Fraction(lo[0])
    assert Fraction(m[0]) + Fraction(r[0]) >= Fraction(hi[0])
