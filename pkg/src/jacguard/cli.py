"""Command-line front end.

Exit codes: 0 when every element was processed, 2 for malformed input or
arguments, 3 when some element is already invalid at t=0.
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .bases import CorruptCache, IoFailure, MatrixCache, default_cache
from .batch import INVALID_AT_START, MeshQuery, max_valid_step_mesh
from .checker import INVALID, UNDECIDED, VALID, BadAccuracy, Checker, InvalidAtStart
from .elements import MAX_ORDER, UnsupportedOrder, element_class
from .formats import (
    MalformedInput, ReportEntry, entry_from, format_report, parse_query_file,
)
from .numerics import rational_to_str

EXIT_OK, EXIT_MALFORMED, EXIT_INVALID_AT_START = 0, 2, 3


@dataclass
class RunConfig:
    delta: float = 1e-6
    l_max: int = 40
    threads: int = 1
    cache_path: str | None = None
    queue_cap: int = 200_000

    def __post_init__(self):
        if not self.delta > 0:
            raise BadAccuracy(f"accuracy must be positive, got {self.delta}")
        if self.l_max < 1:
            raise ValueError("l_max must be at least 1")
        if self.threads < 1:
            raise ValueError("thread count must be at least 1")


def _config(args) -> RunConfig:
    return RunConfig(args.delta, args.lmax, getattr(args, "threads", 1), getattr(args, "cache", None))


def _cache(cfg: RunConfig) -> MatrixCache:
    return MatrixCache.load(cfg.cache_path) if cfg.cache_path else default_cache()


def _figure_path(out: str, tag: str) -> str:
    p = Path(out)
    return str(p.with_name(f"{p.stem}.{tag}.png"))


# -- subcommands --------------------------------------------------------------

def cmd_precompute(args) -> int:
    cache = MatrixCache()
    for name in args.classes.split(","):
        cls = element_class(name.strip())
        for p in range(1, min(args.max_order, MAX_ORDER[cls.name]) + 1):
            cache.for_element(cls, p, False)
            cache.for_element(cls, p, True)
            cache.gradient_table(cls, p)
    cache.save(args.out)
    print(f"saved {len(cache.keys())} grids to {args.out}")
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _config(args)
    query = parse_query_file(args.input)
    cache = _cache(cfg)
    entries: list[ReportEntry] = []
    t_global = argmin = None
    status = EXIT_OK
    if args.static or not query.elements[0].dynamic:
        checker = Checker(cfg.delta, cfg.l_max, cfg.queue_cap, cache=cache)
        for spec in query.elements:
            t0 = time.perf_counter()
            res = checker.check_static(spec)
            entries.append(entry_from(spec.ident, res, time.perf_counter() - t0))
    else:
        q = MeshQuery(query.elements, cfg.delta, cfg.l_max, cfg.threads, cfg.queue_cap,
                      prune=not args.no_prune)
        mesh = max_valid_step_mesh(q, cache, record_invalid=True, cache_path=cfg.cache_path)
        for spec, res, sec in zip(query.elements, mesh.results, mesh.seconds):
            entries.append(entry_from(spec.ident, res, sec))
            if res.verdict == INVALID_AT_START:
                status = EXIT_INVALID_AT_START
                print(f"element {spec.ident} is invalid at t=0", file=sys.stderr)
        t_global, argmin = mesh.t_global, mesh.argmin
    Path(args.out).write_text(format_report(entries, t_global, argmin, timing=not args.no_timing))
    if args.plot:
        _plot_check(args, query, entries, cfg, cache)
    return status


def _plot_check(args, query, entries, cfg, cache) -> None:
    from . import plotting
    dynamic = any(e.t_lower is not None for e in entries)
    if dynamic:
        plotting.plot_t_lower([e.t_lower for e in entries], _figure_path(args.out, "t_lower"))
        worst = min(range(len(entries)), key=lambda i: (entries[i].t_lower, i))
        spec = query.elements[worst]
        trace = []
        checker = Checker(cfg.delta, cfg.l_max, cfg.queue_cap, cache=cache,
                          trace=lambda lo, hi: trace.append((lo, hi)))
        try:
            checker.max_valid_step(spec)
        except InvalidAtStart:
            return
        plotting.plot_trace(trace, _figure_path(args.out, "trace"))
        if spec.cls.n == 2:
            e = entries[worst]
            plotting.plot_element(spec, [0.0, e.t_lower, 1.0], _figure_path(args.out, "element"), e.witness)
    else:
        bad = [i for i, e in enumerate(entries) if e.witness is not None]
        if bad and query.elements[bad[0]].cls.n == 2:
            plotting.plot_element(query.elements[bad[0]], [0.0], _figure_path(args.out, "element"),
                                  entries[bad[0]].witness)


def cmd_quadrature(args) -> int:
    from .quadrature import adaptive_rule
    cfg = _config(args)
    query = parse_query_file(args.input)
    spec = next((e for e in query.elements if e.ident == args.element), None)
    if spec is None:
        raise MalformedInput("no such element", element=args.element)
    checker = Checker(cfg.delta, cfg.l_max, cfg.queue_cap, cache=_cache(cfg))
    res = checker.max_valid_step(spec) if spec.dynamic else checker.check_static(spec)
    rule = adaptive_rule(spec.cls, spec.p, res.quad_seq, args.base_order)
    header = f"# element {spec.ident} verdict {res.verdict} seq {','.join(map(str, res.quad_seq)) or '-'}\n"
    Path(args.out).write_text(header + rule.to_records())
    if args.plot and spec.cls.n == 2:
        from . import plotting
        plotting.plot_rule(rule, _figure_path(args.out, "rule"))
    print(f"{len(rule)} points ({rule.weighted} weighted) over {len(rule.leaf_maps)} leaves")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracle import falsify_by_sampling
    query = parse_query_file(args.input)
    lines = ["jacguard-oracle 1", f"resolution {args.resolution} time_samples {args.time_samples}"]
    for spec in query.elements:
        s = falsify_by_sampling(spec, args.resolution, args.time_samples)
        if s is None:
            lines.append(f"element {spec.ident} sample -")
        else:
            pt = ",".join(rational_to_str(c) for c in s.point)
            lines.append(f"element {spec.ident} sample {pt};{rational_to_str(s.time)} "
                         f"value {rational_to_str(s.value)}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    """Static verdicts on each element's final shape, by method."""
    from .baselines import BASELINES
    cfg = _config(args)
    query = parse_query_file(args.input)
    cache = _cache(cfg)
    checker = Checker(cfg.delta, cfg.l_max, cfg.queue_cap, cache=cache)
    names = [b.strip() for b in args.baselines.split(",") if b.strip()]
    for b in names:
        if b not in BASELINES:
            raise MalformedInput(f"unknown baseline {b!r}; choose from {sorted(BASELINES)}")
    methods = {"conservative": lambda s: checker.check_static(s).verdict}
    for b in names:
        fn = BASELINES[b]
        methods[b] = lambda s, fn=fn: fn(s, cache=cache)
    specs = [e.at_end() for e in query.elements]
    for fn in methods.values():  # warm caches outside the timings
        fn(specs[0])
    rows = []
    for name, fn in methods.items():
        counts = {VALID: 0, INVALID: 0, UNDECIDED: 0}
        times = []
        for spec in specs:
            t0 = time.perf_counter()
            v = fn(spec)
            times.append(time.perf_counter() - t0)
            counts[v] += 1
        rows.append([name, "conservative" if name == "conservative" else "baseline (not conservative)",
                     counts[VALID], counts[INVALID], counts[UNDECIDED],
                     f"{statistics.mean(times) * 1e6:.2f}", f"{statistics.median(times) * 1e6:.2f}"])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "kind", "valid", "invalid", "undecided", "mean_us", "median_us"])
        w.writerows(rows)
    for r in rows:
        print(",".join(map(str, r)))
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jacguard", description="Conservative Jacobian validity checks")
    sub = ap.add_subparsers(dest="command", required=True)

    def run_opts(p):
        p.add_argument("--delta", type=float, default=1e-6)
        p.add_argument("--lmax", type=int, default=40)
        p.add_argument("--cache", default=None)

    p = sub.add_parser("precompute", help="build and save the matrix cache")
    p.add_argument("--classes", required=True)
    p.add_argument("--max-order", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("check", help="per-element and mesh-global checks")
    p.add_argument("--input", required=True)
    run_opts(p)
    p.add_argument("--static", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-prune", action="store_true", help="report each element's own bound")
    p.add_argument("--no-timing", action="store_true", help="omit the timing section")
    p.add_argument("--plot", action="store_true", help="write figures next to the report")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("quadrature", help="adaptive rule for one element")
    p.add_argument("--input", required=True)
    p.add_argument("--element", required=True)
    run_opts(p)
    p.add_argument("--base-order", type=int, default=None)
    p.add_argument("--plot", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quadrature)

    p = sub.add_parser("oracle", help="exact sampling falsifier")
    p.add_argument("--input", required=True)
    p.add_argument("--resolution", "-r", type=int, required=True)
    p.add_argument("--time-samples", "-k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="compare against non-conservative baselines")
    p.add_argument("--input", required=True)
    run_opts(p)
    p.add_argument("--baselines", default="sampling,fp-bezier")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidAtStart as exc:
        print(f"element {exc.element_id} is invalid at t=0", file=sys.stderr)
        return EXIT_INVALID_AT_START
    except (MalformedInput, BadAccuracy, UnsupportedOrder, CorruptCache, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
