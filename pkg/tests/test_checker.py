from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fixtures import zero_corner_triangle, collapsing_triangle
from jacguard.checker import (
    GAVE_UP, INVALID, INVERSION, UNDECIDED, VALID, VALID_THROUGHOUT, BadAccuracy,
    Checker, InvalidAtStart, Witness, check_static, max_valid_step, verify_witness,
)
from jacguard.elements import CLASSES
from jacguard.generate import identity_element, random_trajectory_element
from jacguard.jacobian import ElementSpec
from jacguard.oracle import falsify_by_sampling, linear_triangle_positive_on

TRI = CLASSES["triangle"]


def test_collapse_inversion_brackets_the_root():
    res = max_valid_step(collapsing_triangle(), delta=1e-6)
    assert res.verdict == INVERSION
    spec = collapsing_triangle()
    assert linear_triangle_positive_on(spec, res.t_lower)
    assert not linear_triangle_positive_on(spec, Fraction(res.t_lower) + Fraction(1e-6))
    assert verify_witness(spec, res.witness)
    assert res.witness.time - Fraction(res.t_lower) <= Fraction(1e-6)


def test_lower_bound_never_decreases():
    seen = []
    Checker(trace=lambda lo, hi: seen.append((lo, hi))).max_valid_step(collapsing_triangle())
    lows = [lo for lo, _ in seen]
    highs = [hi for _, hi in seen]
    assert lows == sorted(lows)
    assert highs == sorted(highs, reverse=True)


def test_identity_is_valid_immediately():
    for name, cls in CLASSES.items():
        res = max_valid_step(identity_element(cls, 2))
        assert res.verdict == VALID_THROUGHOUT and res.t_lower == 1.0 and res.pops == 1
        assert check_static(identity_element(cls, 2, dynamic=False)).verdict == VALID


def test_zero_corner_is_invalid_with_exact_witness():
    res = check_static(zero_corner_triangle())
    assert res.verdict == INVALID
    assert res.witness.point == (1, 0)
    assert verify_witness(zero_corner_triangle(), res.witness)


def test_zero_corner_needs_the_exact_corner_fallback():
    res = Checker(l_max=10, exact_fallback=False).check_static(zero_corner_triangle())
    assert res.verdict == UNDECIDED


def test_invalid_start_is_reported_with_the_element_id():
    x0 = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    spec = ElementSpec(TRI, 1, x0, x0 * 2, "flipped")
    with pytest.raises(InvalidAtStart) as info:
        max_valid_step(spec)
    assert info.value.element_id == "flipped"


def test_accuracy_must_be_positive():
    with pytest.raises(BadAccuracy):
        max_valid_step(collapsing_triangle(), delta=0.0)


def test_cutoff_prunes_above_the_running_minimum():
    res = max_valid_step(collapsing_triangle(), t_cutoff=0.1)
    assert res.verdict == GAVE_UP and res.pruned
    assert 0.1 < res.t_lower
    assert linear_triangle_positive_on(collapsing_triangle(), res.t_lower)


def test_depth_cap_gives_up_conservatively():
    res = max_valid_step(collapsing_triangle(), l_max=5)
    assert res.verdict == GAVE_UP and not res.pruned
    assert linear_triangle_positive_on(collapsing_triangle(), res.t_lower)


def test_witness_verification_rejects_outside_points():
    spec = collapsing_triangle()
    assert not verify_witness(spec, Witness((Fraction(2), Fraction(0)), Fraction(1, 2)))
    assert not verify_witness(spec, Witness((Fraction(0), Fraction(0)), Fraction(0)))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=6, max_size=6))
def test_static_linear_triangles_follow_orientation(coords):
    x = np.array(coords, dtype=float).reshape(3, 2) / 4
    det = (x[1, 0] - x[0, 0]) * (x[2, 1] - x[0, 1]) - (x[1, 1] - x[0, 1]) * (x[2, 0] - x[0, 0])
    verdict = check_static(ElementSpec(TRI, 1, x)).verdict
    assert verdict == (VALID if det > 0 else INVALID)


CASES = [(name, p) for name in sorted(CLASSES) for p in (1, 2)]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CASES), st.integers(0, 2**32 - 1))
def test_random_elements_are_never_contradicted(case, seed):
    name, p = case
    spec = random_trajectory_element(CLASSES[name], p, np.random.default_rng(seed))
    res = max_valid_step(spec)
    assert falsify_by_sampling(spec, 4, 16, t_max=Fraction(res.t_lower)) is None
    if res.verdict == INVERSION:
        assert verify_witness(spec, res.witness)
        assert res.witness.time <= Fraction(res.t_lower) + Fraction(1e-6)
    final = check_static(spec.at_end())
    if final.verdict == INVALID:
        assert verify_witness(spec.at_end(), final.witness)
        assert res.verdict != VALID_THROUGHOUT
