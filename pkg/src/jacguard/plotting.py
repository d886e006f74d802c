"""Figures written next to CLI reports (Agg backend, files only)."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bases import lagrange_eval  # noqa: E402
from .elements import geom_orders, grid_size  # noqa: E402
from .jacobian import ElementSpec  # noqa: E402


def plot_t_lower(values: Sequence[float], path, title: str = "conservative step bounds") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist(np.asarray(values, dtype=float), bins=40, range=(0, 1), color="#4a7ab0")
    ax.set_xlabel("t_lower")
    ax.set_ylabel("elements")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trace(trace: Sequence[tuple[float, float]], path, root: float | None = None) -> None:
    """Lower and upper bounds on the inversion time after every queue pop."""
    lo = np.array([a for a, _ in trace])
    hi = np.array([b if np.isfinite(b) else np.nan for _, b in trace])
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(lo, label="t_lower")
    ax.plot(hi, label="t_upper")
    if root is not None:
        ax.axhline(root, color="k", lw=0.8, ls="--", label="exact root")
    ax.set_xlabel("queue pops")
    ax.set_ylabel("t")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _boundary(spec: ElementSpec, t: float, samples: int = 24) -> list[np.ndarray]:
    """Images of the reference edges of a 2-D element at time t."""
    cls, p = spec.cls, spec.p
    x0 = spec.control_t0
    x1 = x0 if spec.control_t1 is None else spec.control_t1
    x = (1 - t) * x0 + t * x1
    nodes = grid_size(cls, geom_orders(cls, p))
    if cls.name == "triangle":
        corners = [(0, 0), (1, 0), (0, 1)]
    else:
        corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    out = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        curve = []
        for s in np.linspace(0, 1, samples):
            fs = Fraction(s).limit_denominator(10 ** 6)
            pt = tuple(Fraction(u) + fs * (Fraction(v) - Fraction(u)) for u, v in zip(a, b))
            phi = np.array([float(lagrange_eval(cls, p, j, pt)) for j in range(nodes)])
            curve.append(phi @ x)
        out.append(np.array(curve))
    return out


def plot_element(spec: ElementSpec, times: Sequence[float], path, witness=None) -> None:
    if spec.cls.n != 2:
        raise ValueError("only planar elements can be drawn")
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for t, color in zip(times, plt.cm.viridis(np.linspace(0, 0.9, len(times)))):
        for k, edge in enumerate(_boundary(spec, t)):
            ax.plot(edge[:, 0], edge[:, 1], color=color, label=f"t = {t:.4g}" if k == 0 else None)
    if witness is not None:
        t = float(witness.time) if witness.time is not None else 0.0
        x0 = spec.control_t0
        x1 = x0 if spec.control_t1 is None else spec.control_t1
        x = (1 - t) * x0 + t * x1
        nodes = grid_size(spec.cls, geom_orders(spec.cls, spec.p))
        phi = np.array([float(lagrange_eval(spec.cls, spec.p, j, witness.point)) for j in range(nodes)])
        w = phi @ x
        ax.plot([w[0]], [w[1]], "r*", ms=12, label="witness")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rule(rule, path) -> None:
    """Leaves and evaluation points of a planar quadrature rule."""
    if len(rule.points[0]) != 2:
        raise ValueError("only planar rules can be drawn")
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    tri = len(rule.leaf_maps) and _is_simplex(rule)
    ref = [(0, 0), (1, 0), (0, 1)] if tri else [(0, 0), (1, 0), (1, 1), (0, 1)]
    for leaf in rule.leaf_maps:
        poly = np.array([[float(c) for c in leaf(v)] for v in ref + ref[:1]])
        ax.plot(poly[:, 0], poly[:, 1], color="0.6", lw=0.7)
    pts = np.array([[float(c) for c in x] for x in rule.points])
    w = np.array([float(v) for v in rule.weights])
    ax.scatter(pts[w > 0, 0], pts[w > 0, 1], s=8, label="weighted")
    ax.scatter(pts[w == 0, 0], pts[w == 0, 1], s=12, marker="x", color="r", label="corner (weight 0)")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _is_simplex(rule) -> bool:
    return sum(rule.weights) == Fraction(1, 2)
