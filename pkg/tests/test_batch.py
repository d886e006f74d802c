import numpy as np
import pytest

from fixtures import collapsing_triangle
from jacguard.batch import MeshQuery, max_valid_step_mesh, sort_key
from jacguard.bases import default_cache
from jacguard.checker import InvalidAtStart, max_valid_step
from jacguard.elements import CLASSES
from jacguard.generate import identity_element, random_trajectory_element
from jacguard.jacobian import ElementSpec

TRI = CLASSES["triangle"]


def _identities(k, cls=TRI, p=1):
    out = []
    for i in range(k):
        e = identity_element(cls, p)
        out.append(ElementSpec(cls, p, e.control_t0, e.control_t1, f"id{i}"))
    return out


def test_identity_mesh_is_valid_for_the_whole_step():
    res = max_valid_step_mesh(MeshQuery(_identities(20)))
    assert res.t_global == 1.0 and res.argmin == "id0"


def test_single_inverting_element_sets_the_bound():
    els = _identities(99)
    els.insert(37, collapsing_triangle("bad"))
    res = max_valid_step_mesh(MeshQuery(els))
    assert res.argmin == "bad" and res.argmin_index == 37
    assert res.t_global == max_valid_step(collapsing_triangle()).t_lower


def test_constant_term_ordering():
    cache = default_cache()
    assert sort_key(collapsing_triangle(), cache) == pytest.approx(13.0)
    res = max_valid_step_mesh(MeshQuery(_identities(3) + [collapsing_triangle("f")]))
    assert res.order[-1] == 3


def test_empty_query():
    with pytest.raises(ValueError):
        max_valid_step_mesh(MeshQuery([]))


def test_invalid_start_propagates_or_is_recorded():
    x0 = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    els = _identities(3) + [ElementSpec(TRI, 1, x0, x0, "flip")]
    with pytest.raises(InvalidAtStart) as info:
        max_valid_step_mesh(MeshQuery(els))
    assert info.value.element_id == "flip"
    res = max_valid_step_mesh(MeshQuery(els), record_invalid=True)
    assert res.results[3].verdict == "InvalidAtStart" and res.t_global == 0.0


def _random_mesh(n, seed, cls=TRI, p=1):
    rng = np.random.default_rng(seed)
    return [random_trajectory_element(cls, p, rng, ident=f"e{i}") for i in range(n)]


def test_pruning_never_changes_the_answer():
    els = _random_mesh(1000, 4)
    on = max_valid_step_mesh(MeshQuery(els, prune=True))
    off = max_valid_step_mesh(MeshQuery(els, prune=False))
    assert (on.t_global, on.argmin) == (off.t_global, off.argmin)
    for a, b in zip(on.results, off.results):
        if a.pruned:
            # stopped early: still conservative, and above the global bound
            assert on.t_global < a.t_lower <= b.t_lower
        else:
            assert a == b


def test_parallel_matches_serial():
    els = _random_mesh(120, 9, CLASSES["quad"], 2)
    serial = max_valid_step_mesh(MeshQuery(els, workers=1))
    parallel = max_valid_step_mesh(MeshQuery(els, workers=3))
    assert (serial.t_global, serial.argmin) == (parallel.t_global, parallel.argmin)
