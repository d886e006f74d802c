"""Line-oriented query and report files.

Query file::

    jacguard-query 1
    dimension 2
    class triangle
    order 1
    dynamic 1
    element e1
    t0 0x0p+0 0x0p+0
    ...
    t1 ...
    end

Coordinates are hexadecimal or decimal machine reals; one ``t0`` line per
geometric node in canonical order, then the same number of ``t1`` lines when
the file is dynamic.  Blank lines and ``#`` comments are ignored.

Reports start with ``jacguard-report 1``, hold one ``element`` line per
element and a ``global`` line in the ``[verdicts]`` section, and keep wall
times in a separate ``[timing]`` section so the verdicts are reproducible
byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .batch import MeshQuery
from .checker import DynamicResult, StaticResult, Witness
from .elements import CLASSES, UnsupportedOrder, check_order, geom_orders, grid_size
from .jacobian import ElementSpec
from .numerics import rational_from_str, rational_to_str

QUERY_MAGIC = "jacguard-query"
REPORT_MAGIC = "jacguard-report"
FORMAT_VERSION = 1
_HEADER = ("dimension", "class", "order", "dynamic")


class MalformedInput(ValueError):
    def __init__(self, message: str, line: int | None = None, element: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if element is not None:
            where.append(f"element {element!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.element = element


def parse_real(text: str) -> float:
    t = text.strip()
    try:
        if "0x" in t.lower():
            return float.fromhex(t)
        return float(t)
    except ValueError:
        raise ValueError(f"not a real literal: {text!r}") from None


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def parse_query(text: str) -> tuple[MeshQuery, dict]:
    """Parse query text into a MeshQuery plus its header fields."""
    it = iter(_lines(text))
    try:
        no, first = next(it)
    except StopIteration:
        raise MalformedInput("empty query file") from None
    if first != [QUERY_MAGIC, str(FORMAT_VERSION)]:
        raise MalformedInput(f"expected '{QUERY_MAGIC} {FORMAT_VERSION}'", no)
    header: dict = {}
    elements: list[ElementSpec] = []
    pending = None
    for no, toks in it:
        key = toks[0]
        if key in _HEADER:
            if elements or pending:
                raise MalformedInput(f"header field {key!r} after the first element", no)
            if key in header or len(toks) != 2:
                raise MalformedInput(f"bad header field {key!r}", no)
            header[key] = toks[1]
            continue
        if key == "element":
            if pending is not None:
                raise MalformedInput("element block not closed with 'end'", no, pending["id"])
            if len(toks) != 2:
                raise MalformedInput("element line needs exactly one id", no)
            cls, p, dynamic, n, nodes = _validate_header(header, no)
            if any(e.ident == toks[1] for e in elements):
                raise MalformedInput("duplicate element id", no, toks[1])
            pending = {"id": toks[1], "t0": [], "t1": [], "line": no}
            continue
        if key in ("t0", "t1"):
            if pending is None:
                raise MalformedInput(f"{key!r} outside an element block", no)
            if len(toks) != n + 1:
                raise MalformedInput(f"expected {n} coordinates", no, pending["id"])
            if key == "t1" and not dynamic:
                raise MalformedInput("'t1' in a static query", no, pending["id"])
            if key == "t0" and pending["t1"]:
                raise MalformedInput("'t0' after 't1'", no, pending["id"])
            try:
                pending[key].append([parse_real(t) for t in toks[1:]])
            except ValueError as exc:
                raise MalformedInput(str(exc), no, pending["id"]) from None
            continue
        if key == "end":
            if pending is None or len(toks) != 1:
                raise MalformedInput("unexpected 'end'", no)
            elements.append(_finish(pending, cls, p, dynamic, nodes, no))
            pending = None
            continue
        raise MalformedInput(f"unknown field {key!r}", no, pending["id"] if pending else None)
    if pending is not None:
        raise MalformedInput("truncated element block", None, pending["id"])
    if not elements:
        raise MalformedInput("query holds no elements")
    return MeshQuery(elements), header


def _validate_header(header: dict, no: int):
    missing = [k for k in _HEADER if k not in header]
    if missing:
        raise MalformedInput(f"missing header fields {missing}", no)
    name = header["class"]
    if name not in CLASSES:
        raise MalformedInput(f"unknown element class {name!r}", no)
    cls = CLASSES[name]
    try:
        p = int(header["order"])
        n = int(header["dimension"])
        dynamic = {"0": False, "1": True}[header["dynamic"]]
    except (ValueError, KeyError):
        raise MalformedInput("order, dimension and dynamic must be integers (dynamic 0 or 1)", no) from None
    if n != cls.n:
        raise MalformedInput(f"dimension {n} does not match class {name}", no)
    try:
        check_order(cls, p)
    except UnsupportedOrder as exc:
        raise MalformedInput(str(exc), no) from None
    return cls, p, dynamic, n, grid_size(cls, geom_orders(cls, p))


def _finish(pending, cls, p, dynamic, nodes, no) -> ElementSpec:
    ident = pending["id"]
    if len(pending["t0"]) != nodes:
        raise MalformedInput(f"expected {nodes} 't0' rows, got {len(pending['t0'])}", no, ident)
    if dynamic and len(pending["t1"]) != nodes:
        raise MalformedInput(f"expected {nodes} 't1' rows, got {len(pending['t1'])}", no, ident)
    x1 = np.array(pending["t1"]) if dynamic else None
    return ElementSpec(cls, p, np.array(pending["t0"]), x1, ident)


def parse_query_file(path) -> MeshQuery:
    with open(path) as fh:
        return parse_query(fh.read())[0]


def format_query(elements: Sequence[ElementSpec]) -> str:
    if not elements:
        raise ValueError("no elements to write")
    e0 = elements[0]
    for e in elements:
        if (e.cls, e.p, e.dynamic) != (e0.cls, e0.p, e0.dynamic):
            raise ValueError("a query file holds one class, order and time mode")
    out = [f"{QUERY_MAGIC} {FORMAT_VERSION}", f"dimension {e0.cls.n}", f"class {e0.cls.name}",
           f"order {e0.p}", f"dynamic {int(e0.dynamic)}"]
    for e in elements:
        out.append(f"element {e.ident}")
        for row in e.control_t0:
            out.append("t0 " + " ".join(float(v).hex() for v in row))
        if e.dynamic:
            for row in e.control_t1:
                out.append("t1 " + " ".join(float(v).hex() for v in row))
        out.append("end")
    return "\n".join(out) + "\n"


def write_query_file(path, elements: Sequence[ElementSpec]) -> None:
    with open(path, "w") as fh:
        fh.write(format_query(elements))


# -- reports ------------------------------------------------------------------

@dataclass
class ReportEntry:
    ident: str
    verdict: str
    t_lower: float | None
    witness: Witness | None
    depth: int
    seq: tuple[int, ...]
    seconds: float = 0.0


def entry_from(ident: str, res: DynamicResult | StaticResult, seconds: float = 0.0) -> ReportEntry:
    t = res.t_lower if isinstance(res, DynamicResult) else None
    return ReportEntry(ident, res.verdict, t, res.witness, res.depth, tuple(res.quad_seq), seconds)


def _fmt_witness(w: Witness | None) -> str:
    if w is None:
        return "-"
    pt = ",".join(rational_to_str(c) for c in w.point)
    return pt if w.time is None else f"{pt};{rational_to_str(Fraction(w.time))}"


def _parse_witness(text: str) -> Witness | None:
    if text == "-":
        return None
    pt, _, t = text.partition(";")
    return Witness(tuple(rational_from_str(c) for c in pt.split(",")),
                   rational_from_str(t) if t else None)


def format_report(entries: Sequence[ReportEntry], t_global: float | None = None,
                  argmin: str | None = None, timing: bool = True) -> str:
    out = [f"{REPORT_MAGIC} {FORMAT_VERSION}", "[verdicts]"]
    for e in entries:
        t = "-" if e.t_lower is None else float(e.t_lower).hex()
        seq = ",".join(map(str, e.seq)) or "-"
        out.append(f"element {e.ident} verdict {e.verdict} t_lower {t} "
                   f"witness {_fmt_witness(e.witness)} depth {e.depth} seq {seq}")
    if t_global is not None:
        out.append(f"global t_global {float(t_global).hex()} argmin {argmin}")
    if timing:
        out.append("[timing]")
        for e in entries:
            out.append(f"element {e.ident} seconds {e.seconds:.9f}")
    return "\n".join(out) + "\n"


def write_report(path, entries: Sequence[ReportEntry], t_global: float | None = None,
                 argmin: str | None = None, timing: bool = True) -> None:
    with open(path, "w") as fh:
        fh.write(format_report(entries, t_global, argmin, timing))


def verdict_section(text: str) -> str:
    """The reproducible part of a report."""
    return text.split("[timing]", 1)[0]


def parse_report(text: str) -> tuple[list[ReportEntry], float | None, str | None]:
    entries: dict[str, ReportEntry] = {}
    t_global = argmin = None
    section = None
    for no, toks in _lines(text):
        if no == 1 or toks[0] == REPORT_MAGIC:
            if toks != [REPORT_MAGIC, str(FORMAT_VERSION)]:
                raise MalformedInput("not a report file", no)
            continue
        if toks[0].startswith("["):
            section = toks[0]
            continue
        if toks[0] == "global":
            t_global, argmin = float.fromhex(toks[2]), toks[4]
            continue
        if toks[0] != "element":
            raise MalformedInput(f"unknown field {toks[0]!r}", no)
        f = dict(zip(toks[2::2], toks[3::2]))
        if section == "[timing]":
            entries[toks[1]].seconds = float(f["seconds"])
            continue
        entries[toks[1]] = ReportEntry(
            toks[1], f["verdict"], None if f["t_lower"] == "-" else float.fromhex(f["t_lower"]),
            _parse_witness(f["witness"]), int(f["depth"]),
            () if f["seq"] == "-" else tuple(int(q) for q in f["seq"].split(",")))
    return list(entries.values()), t_global, argmin
