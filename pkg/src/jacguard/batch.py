"""Mesh-level queries: the largest step for which every element stays valid.

Elements are visited in ascending order of |J| at the origin corner at t=0
(smallest first, as the likeliest to invert), and each is searched with the
running minimum as its cutoff.  Workers get contiguous slices of the sorted
order and keep private minima, so results do not depend on scheduling.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bases import MatrixCache, default_cache
from .checker import (
    GAVE_UP, Checker, DynamicResult, InvalidAtStart,
)
from .jacobian import ElementSpec

INVALID_AT_START = "InvalidAtStart"


@dataclass
class MeshQuery:
    elements: list[ElementSpec]
    delta: float = 1e-6
    l_max: int = 40
    workers: int = 1
    queue_cap: int = 200_000
    prune: bool = True


@dataclass
class MeshResult:
    t_global: float
    results: list[DynamicResult]
    argmin: str | None
    argmin_index: int | None
    order: list[int] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)


def sort_key(spec: ElementSpec, cache: MatrixCache) -> float:
    """|J| at the first grid point (origin corner) at t=0, in plain floating point."""
    table = cache.gradient_table(spec.cls, spec.p)
    n = spec.cls.n
    mid = table.matrix._prepare()[0]
    rows = mid[[b * table.points for b in range(n)]]  # d/dξ_b at the origin
    jac = (rows @ spec.control_t0).T  # entry (a, b) = d x_a / d ξ_b
    return float(np.linalg.det(jac))


def _run_slice(specs: Sequence[ElementSpec], delta: float, l_max: int, queue_cap: int,
               prune: bool, record_invalid: bool, cache: MatrixCache | None = None):
    checker = Checker(delta, l_max, queue_cap, cache=cache or default_cache())
    running = 1.0
    out = []
    for spec in specs:
        t0 = time.perf_counter()
        try:
            res = checker.max_valid_step(spec, running if prune else None)
        except InvalidAtStart as exc:
            if not record_invalid:
                raise InvalidAtStart(str(exc), spec.ident) from None
            res = DynamicResult(INVALID_AT_START, 0.0)
        running = min(running, res.t_lower)
        out.append((res, time.perf_counter() - t0))
    return out


def _worker(args):
    specs, delta, l_max, queue_cap, prune, record_invalid, cache_path = args
    cache = MatrixCache.load(cache_path) if cache_path else None
    return _run_slice(specs, delta, l_max, queue_cap, prune, record_invalid, cache)


def max_valid_step_mesh(q: MeshQuery, cache: MatrixCache | None = None,
                        record_invalid: bool = False, cache_path: str | None = None) -> MeshResult:
    """Conservative global step bound, per-element results and the limiting element.

    With ``record_invalid`` an element that is already invalid at t=0 gets
    verdict ``InvalidAtStart`` and bound 0 instead of aborting the query.
    """
    if not q.elements:
        raise ValueError("mesh query has no elements")
    cache = cache or default_cache()
    keys = [sort_key(s, cache) for s in q.elements]
    order = sorted(range(len(keys)), key=lambda i: (keys[i], i))
    specs = [q.elements[i] for i in order]
    workers = max(1, min(q.workers, len(specs)))
    if workers == 1:
        done = _run_slice(specs, q.delta, q.l_max, q.queue_cap, q.prune, record_invalid, cache)
    else:
        bounds = np.linspace(0, len(specs), workers + 1).astype(int)
        jobs = [(specs[a:b], q.delta, q.l_max, q.queue_cap, q.prune, record_invalid, cache_path)
                for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(workers) as pool:
            done = [r for part in pool.map(_worker, jobs) for r in part]
    results: list = [None] * len(specs)
    seconds = [0.0] * len(specs)
    for i, (res, sec) in zip(order, done):
        results[i] = res
        seconds[i] = sec
    t_global = min(r.t_lower for r in results)
    arg = next(i for i, r in enumerate(results) if r.t_lower == t_global)
    return MeshResult(t_global, results, q.elements[arg].ident, arg, order, seconds)


def pruned(result: DynamicResult) -> bool:
    return result.verdict == GAVE_UP and result.pruned


def default_workers() -> int:
    return os.cpu_count() or 1
