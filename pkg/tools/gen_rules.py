"""Generate positive quadrature rules with rational points and weights.

A linear program over an interior lattice finds a non-negative rule that
matches all monomial moments up to the requested degree; the support of the
returned vertex is then re-solved in exact rationals.  When no lattice gives
a usable vertex, a collapsed product of weighted 1D rules (found the same
way) is used instead.  Output is the JSON table shipped with the package.

    python tools/gen_rules.py src/jacguard/data/rules.json
"""

import json
import sys
from fractions import Fraction
from itertools import product
from math import factorial

import numpy as np
from scipy.optimize import linprog

MAX_DEGREE = {1: 6, 2: 10, 3: 8}  # by simplex dimension
MAX_LATTICE = 4000


def exponents(s, d):
    return [e for e in product(range(d + 1), repeat=s) if sum(e) <= d]


def moment(e):
    num = 1
    for k in e:
        num *= factorial(k)
    return Fraction(num, factorial(sum(e) + len(e)))


def lattice(s, g):
    return [tuple(Fraction(k, g) for k in idx) for idx in product(range(1, g), repeat=s)
            if sum(idx) <= g - 1]


def mono(e, x):
    v = Fraction(1)
    for k, xi in zip(e, x):
        v *= xi ** k
    return v


def exact_solve(rows, rhs):
    """Solve a consistent system with independent columns; None if inconsistent."""
    m, n = len(rows), len(rows[0])
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    piv_rows = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if aug[i][c] != 0), None)
        if p is None:
            return None
        aug[r], aug[p] = aug[p], aug[r]
        inv = 1 / aug[r][c]
        aug[r] = [v * inv for v in aug[r]]
        for i in range(m):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[r])]
        piv_rows.append(r)
        r += 1
    if any(aug[i][n] != 0 for i in range(r, m)):
        return None
    return [aug[i][n] for i in piv_rows]


def weighted_segment_rule(d, a, seed=0):
    """Positive rational rule for int_0^1 f(x) (1 - x)^a dx, exact to degree d."""
    mom = [Fraction(factorial(k) * factorial(a), factorial(k + a + 1)) for k in range(d + 1)]
    rng = np.random.default_rng(seed)
    for g in range(d + 2, 8 * d + 16):
        pts = [Fraction(k, g) for k in range(1, g)]
        A = [[x ** k for x in pts] for k in range(d + 1)]
        for _ in range(4):
            res = linprog(rng.uniform(0.0, 1.0, len(pts)), A_eq=np.array(A, dtype=float),
                          b_eq=np.array(mom, dtype=float), bounds=(0, None), method="highs-ds")
            if res.status != 0:
                break
            support = [i for i, w in enumerate(res.x) if w > 0]
            w = exact_solve([[A[r][i] for i in support] for r in range(d + 1)], mom)
            if w is not None and all(v > 0 for v in w):
                return [pts[i] for i in support], w
    raise RuntimeError(f"no weighted segment rule for degree {d}, weight power {a}")


def collapsed_rule(s, d):
    """Duffy-type product rule on the s-simplex; every factor is rational."""
    factors = [weighted_segment_rule(d, s - 1 - k) for k in range(s)]
    pts, wts = [], []
    for combo in product(*[list(zip(*f)) for f in factors]):
        x, scale, w = [], Fraction(1), Fraction(1)
        for u, wu in combo:
            x.append(scale * u)
            scale *= 1 - u
            w *= wu
        pts.append(tuple(x))
        wts.append(w)
    return pts, wts


def positive_rule(s, d, seed=0):
    exps = exponents(s, d)
    mom = [moment(e) for e in exps]
    rng = np.random.default_rng(seed)
    for g in (d + 3, d + 5, 2 * d + 3, 3 * d + 4, 4 * d + 2, 4 * d + 5, 5 * d + 1, 6 * d + 1):
        pts = lattice(s, g)
        if not pts or len(pts) > MAX_LATTICE:
            continue
        A = [[mono(e, x) for x in pts] for e in exps]
        Af = np.array(A, dtype=float)
        bf = np.array(mom, dtype=float)
        # random costs steer the solver to a non-degenerate vertex
        for _ in range(6):
            res = linprog(rng.uniform(0.0, 1.0, len(pts)), A_eq=Af, b_eq=bf,
                          bounds=(0, None), method="highs-ds")
            if res.status != 0:
                break
            support = [i for i, w in enumerate(res.x) if w > 0]
            cols = [[A[r][i] for i in support] for r in range(len(exps))]
            w = exact_solve(cols, mom)
            if w is not None and all(v > 0 for v in w):
                return [pts[i] for i in support], w
    return collapsed_rule(s, d)


def classic():
    third, sixth = Fraction(1, 3), Fraction(1, 6)
    return {
        (1, 1): ([(Fraction(1, 2),)], [Fraction(1)]),
        (2, 1): ([(third, third)], [Fraction(1, 2)]),
        (2, 2): ([(sixth, sixth), (Fraction(2, 3), sixth), (sixth, Fraction(2, 3))], [sixth] * 3),
        (3, 1): ([(Fraction(1, 4),) * 3], [Fraction(1, 6)]),
    }


def fmt(x):
    return f"{x.numerator}/{x.denominator}"


def main(out):
    names = {1: "segment", 2: "triangle", 3: "tetrahedron"}
    table = {}
    fixed = classic()
    for s, top in MAX_DEGREE.items():
        rules = {}
        for d in range(1, top + 1):
            pts, w = fixed.get((s, d)) or positive_rule(s, d)
            assert all(sum(wi * mono(e, x) for wi, x in zip(w, pts)) == moment(e)
                       for e in exponents(s, d))
            rules[str(d)] = {"points": [[fmt(c) for c in p] for p in pts],
                             "weights": [fmt(v) for v in w]}
            print(names[s], d, len(w), file=sys.stderr)
        table[names[s]] = rules
    with open(out, "w") as fh:
        json.dump(table, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "rules.json")
