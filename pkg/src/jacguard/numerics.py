"""Rounded interval arithmetic and exact rational matrices.

Directed rounding is emulated under the default round-to-nearest mode with
error-free transformations (TwoSum and Dekker's TwoProduct): the nearest
result is stepped one ulp outward only when the operation was inexact. No
process-wide rounding mode is ever touched, so workers need no setup beyond
the import-time check in :func:`assert_round_to_nearest`.

Array kernels (:class:`IntervalArray`, :func:`iv_matmul`) are the hot path.
Matrix products use a midpoint-radius enclosure with a rigorous a-priori
bound on the BLAS rounding error, valid for any summation order.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

Rational = Fraction

_INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1
_U = 2.0 ** -53
_TINY = 2.0 ** -900
_HUGE = 2.0 ** 995
_ETA = 2.0 ** -1074
# smallest normal; additive slack for underflow that keeps radii off the slow subnormal path
_FLOOR = 2.0 ** -1022


class SingularMatrix(ArithmeticError):
    pass


def assert_round_to_nearest() -> None:
    """Fail loudly if the FPU is not in round-to-nearest-even double mode."""
    one = float(np.float64(1.0))
    ok = (
        one + 2.0 ** -53 == one
        and one + 3 * 2.0 ** -53 == one + 2.0 ** -51
        and -one - 2.0 ** -53 == -one
        and -one - 3 * 2.0 ** -53 == -one - 2.0 ** -51
    )
    arr = np.array([1.0, -1.0]) + np.array([3 * 2.0 ** -53, -3 * 2.0 ** -53])
    ok = ok and arr[0] == 1.0 + 2.0 ** -51 and arr[1] == -1.0 - 2.0 ** -51
    if not ok:
        raise RuntimeError("interval kernels require round-to-nearest double arithmetic")


assert_round_to_nearest()


# -- scalar directed rounding -------------------------------------------------

def _two_sum_err(a: float, b: float, s: float) -> float:
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def add_down(a: float, b: float) -> float:
    s = a + b
    if math.isinf(s) or s != s:
        if s != s:
            return -_INF
        if math.isinf(a) or math.isinf(b):
            return s
        return s if s < 0 else math.nextafter(s, -_INF)
    return math.nextafter(s, -_INF) if _two_sum_err(a, b, s) < 0 else s


def add_up(a: float, b: float) -> float:
    return -add_down(-a, -b)


def _two_prod_err(a: float, b: float, p: float) -> float:
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def mul_down(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return 0.0
    p = a * b
    if math.isinf(p):
        if math.isinf(a) or math.isinf(b):
            return p
        return p if p < 0 else math.nextafter(p, -_INF)
    if abs(p) < _TINY or abs(a) > _HUGE or abs(b) > _HUGE:
        return math.nextafter(p, -_INF)
    return math.nextafter(p, -_INF) if _two_prod_err(a, b, p) < 0 else p


def mul_up(a: float, b: float) -> float:
    return -mul_down(-a, b)


# -- scalar Interval ----------------------------------------------------------

class Interval:
    """Closed real interval ``[lo, hi]`` with outward-rounded operations."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if lo != lo or hi != hi or lo > hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        """Exact membership test; ``x`` may be a Fraction, int or float."""
        x = Fraction(x)
        lo_ok = self.lo == -_INF or Fraction(self.lo) <= x
        hi_ok = self.hi == _INF or x <= Fraction(self.hi)
        return lo_ok and hi_ok

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __add__(self, other) -> "Interval":
        other = _as_interval(other)
        return Interval(add_down(self.lo, other.lo), add_up(self.hi, other.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        return self + (-_as_interval(other))

    def __rsub__(self, other) -> "Interval":
        return _as_interval(other) + (-self)

    def __mul__(self, other) -> "Interval":
        other = _as_interval(other)
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        lo = min(mul_down(a, c), mul_down(a, d), mul_down(b, c), mul_down(b, d))
        hi = max(mul_up(a, c), mul_up(a, d), mul_up(b, c), mul_up(b, d))
        return Interval(lo, hi)

    __rmul__ = __mul__

    def half(self) -> "Interval":
        """Exact division by two (outward only if the result is subnormal)."""
        lo, hi = self.lo * 0.5, self.hi * 0.5
        if lo * 2.0 != self.lo:
            lo = math.nextafter(lo, -_INF)
        if hi * 2.0 != self.hi:
            hi = math.nextafter(hi, _INF)
        return Interval(lo, hi)

    def __gt__(self, other) -> bool:
        other = _as_interval(other)
        return self.lo > other.hi

    def __lt__(self, other) -> bool:
        other = _as_interval(other)
        return self.hi < other.lo

    def to_hex(self) -> tuple[str, str]:
        return (self.lo.hex(), self.hi.hex())

    @classmethod
    def from_hex(cls, lo: str, hi: str) -> "Interval":
        return cls(float.fromhex(lo), float.fromhex(hi))


def _as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, Fraction):
        return rat_to_interval(x)
    return iv_from_exact(x)


def iv_from_exact(x: float) -> Interval:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite input {x!r}")
    return Interval(x, x)


def iv_add(a: Interval, b: Interval) -> Interval:
    return a + b


def iv_neg(a: Interval) -> Interval:
    return -a


def iv_mul(a: Interval, b: Interval) -> Interval:
    return a * b


def iv_min(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), min(a.hi, b.hi))


def iv_max(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo, b.lo), max(a.hi, b.hi))


def iv_cmp_gt(a: Interval, b: Interval) -> bool:
    return a.lo > b.hi


def iv_half(a: Interval) -> Interval:
    return a.half()


# -- rationals ----------------------------------------------------------------

def rat_to_interval(r) -> Interval:
    """Tightest interval with double endpoints containing ``r``."""
    r = Fraction(r)
    try:
        f = float(r)  # correctly rounded int/int division
    except OverflowError:
        big = 1.7976931348623157e308
        return Interval(big, _INF) if r > 0 else Interval(-_INF, -big)
    if math.isinf(f):
        big = 1.7976931348623157e308
        return Interval(big, _INF) if r > 0 else Interval(-_INF, -big)
    ff = Fraction(f)
    if ff == r:
        return Interval(f, f)
    if ff < r:
        return Interval(f, math.nextafter(f, _INF))
    return Interval(math.nextafter(f, -_INF), f)


def rational_to_str(r: Fraction) -> str:
    r = Fraction(r)
    return f"{r.numerator}/{r.denominator}"


def rational_from_str(text: str) -> Fraction:
    num, _, den = text.strip().partition("/")
    if not den:
        return Fraction(int(num))
    return Fraction(int(num), int(den))


class RationalMatrix:
    """Dense exact matrix of Fractions, row-major."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence]):
        rows = [tuple(Fraction(x) for x in row) for row in entries]
        self.rows = len(rows)
        self.cols = len(rows[0]) if rows else 0
        if any(len(r) != self.cols for r in rows):
            raise ValueError("ragged matrix")
        self.entries = tuple(rows)

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        one, zero = Fraction(1), Fraction(0)
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self) -> str:
        return f"RationalMatrix({self.rows}x{self.cols})"

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        return rat_matmul(self, other)

    def row_sums(self) -> list[Fraction]:
        return [sum(row, Fraction(0)) for row in self.entries]

    def kron(self, other: "RationalMatrix") -> "RationalMatrix":
        """``self ⊗ other``; ``other``'s indices vary fastest."""
        out = []
        for arow in self.entries:
            for brow in other.entries:
                out.append([a * b for a in arow for b in brow])
        return RationalMatrix(out)

    def matvec(self, v: Sequence) -> list[Fraction]:
        v = [Fraction(x) for x in v]
        return [sum((a * x for a, x in zip(row, v)), Fraction(0)) for row in self.entries]

    def to_interval(self) -> "IntervalMatrix":
        lo = np.empty((self.rows, self.cols))
        hi = np.empty((self.rows, self.cols))
        for i, row in enumerate(self.entries):
            for j, x in enumerate(row):
                iv = rat_to_interval(x)
                lo[i, j] = iv.lo
                hi[i, j] = iv.hi
        return IntervalMatrix(lo, hi)


def rat_matmul(a: RationalMatrix, b: RationalMatrix) -> RationalMatrix:
    if a.cols != b.rows:
        raise ValueError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    bt = list(zip(*b.entries)) if b.rows else [()] * b.cols
    zero = Fraction(0)
    return RationalMatrix(
        [[sum((x * y for x, y in zip(row, col) if x and y), zero) for col in bt]
         for row in a.entries]
    )


def rat_invert(a: RationalMatrix) -> RationalMatrix:
    """Exact inverse by Gauss-Jordan elimination with nonzero pivoting."""
    n = a.rows
    if a.cols != n:
        raise ValueError("only square matrices can be inverted")
    one, zero = Fraction(1), Fraction(0)
    aug = [list(row) + [one if i == j else zero for j in range(n)]
           for i, row in enumerate(a.entries)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularMatrix(f"matrix is singular (column {col})")
        aug[col], aug[piv] = aug[piv], aug[col]
        prow = aug[col]
        inv = one / prow[col]
        if inv != 1:
            prow[:] = [x * inv for x in prow]
        nz = [j for j in range(col, 2 * n) if prow[j] != 0]
        for r in range(n):
            if r == col:
                continue
            f = aug[r][col]
            if f == 0:
                continue
            row = aug[r]
            for j in nz:
                row[j] -= f * prow[j]
    return RationalMatrix([row[n:] for row in aug])


# -- vectorised kernels -------------------------------------------------------

def _nd(x):
    return np.nextafter(x, -_INF)


def _nu(x):
    return np.nextafter(x, _INF)


def arr_add_down(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        s = a + b
        bb = s - a
        err = (a - (s - bb)) + (b - bb)
    out = np.where(err < 0, _nd(s), s)
    bad = ~np.isfinite(s)
    if bad.any():
        a_inf = np.isinf(a) | np.isinf(b)
        fix = np.where(np.isnan(s), -_INF, np.where(a_inf | (s < 0), s, _nd(s)))
        out = np.where(bad, fix, out)
    return out


def arr_add_up(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return -arr_add_down(-a, -b)


def arr_mul_down(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        p = a * b
        c = _SPLITTER * a
        ah = c - (c - a)
        al = a - ah
        c = _SPLITTER * b
        bh = c - (c - b)
        bl = b - bh
        err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    out = np.where(err < 0, _nd(p), p)
    risky = (np.abs(p) < _TINY) | (np.abs(a) > _HUGE) | (np.abs(b) > _HUGE) | ~np.isfinite(err)
    if risky.any():
        zero = (a == 0) | (b == 0)
        a_inf = np.isinf(a) | np.isinf(b)
        fb = np.where(zero, 0.0,
                      np.where(np.isinf(p) & (a_inf | (p < 0)), p, _nd(p)))
        out = np.where(risky, fb, out)
    return out


def arr_mul_up(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return -arr_mul_down(-a, b)


class IntervalArray:
    """Elementwise interval arithmetic on a pair of float arrays."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = self.lo if hi is None else np.asarray(hi, dtype=float)

    @classmethod
    def exact(cls, x) -> "IntervalArray":
        x = np.asarray(x, dtype=float)
        return cls(x, x)

    @property
    def shape(self):
        return self.lo.shape

    def __len__(self) -> int:
        return len(self.lo)

    def __getitem__(self, idx) -> "IntervalArray":
        return IntervalArray(self.lo[idx], self.hi[idx])

    def item(self, i) -> Interval:
        return Interval(self.lo[i], self.hi[i])

    def to_list(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self.lo.ravel().tolist(), self.hi.ravel().tolist())]

    def __neg__(self) -> "IntervalArray":
        return IntervalArray(-self.hi, -self.lo)

    def __add__(self, other: "IntervalArray") -> "IntervalArray":
        return IntervalArray(arr_add_down(self.lo, other.lo), arr_add_up(self.hi, other.hi))

    def __sub__(self, other: "IntervalArray") -> "IntervalArray":
        return IntervalArray(arr_add_down(self.lo, -other.hi), arr_add_up(self.hi, -other.lo))

    def __mul__(self, other: "IntervalArray") -> "IntervalArray":
        a, b = np.broadcast_arrays(self.lo, self.hi)
        c, d = np.broadcast_arrays(other.lo, other.hi)
        a, c = np.broadcast_arrays(a, c)
        b, d = np.broadcast_arrays(b, d)
        lo = np.minimum(np.minimum(arr_mul_down(a, c), arr_mul_down(a, d)),
                        np.minimum(arr_mul_down(b, c), arr_mul_down(b, d)))
        hi = np.maximum(np.maximum(arr_mul_up(a, c), arr_mul_up(a, d)),
                        np.maximum(arr_mul_up(b, c), arr_mul_up(b, d)))
        return IntervalArray(lo, hi)

    def contains_value(self, i, x) -> bool:
        return Interval(self.lo.flat[i], self.hi.flat[i]).contains(x)


def det_interval(m: list[list[IntervalArray]]) -> IntervalArray:
    """Cofactor-expansion determinant of an n x n block (n = 2 or 3)."""
    n = len(m)
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if n == 3:
        c0 = m[1][1] * m[2][2] - m[1][2] * m[2][1]
        c1 = m[1][0] * m[2][2] - m[1][2] * m[2][0]
        c2 = m[1][0] * m[2][1] - m[1][1] * m[2][0]
        return m[0][0] * c0 - m[0][1] * c1 + m[0][2] * c2
    raise ValueError(f"unsupported dimension {n}")


def mr_products(terms) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint and radius enclosing Σ ±a·b for midpoint-radius operands.

    ``terms`` holds (sign, (ma, ra), (mb, rb)).  The radius absorbs the true
    radii of the products plus the rounding of the float evaluation of the
    midpoint sum (at most γ_k Σ|ma·mb|), with slack for rounding in the
    radius computation itself and in the final ``mid ± rad``.
    """
    k = len(terms)
    c = p = s = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for sign, (ma, ra), (mb, rb) in terms:
            prod = ma * mb
            c = c + prod if sign > 0 else c - prod
            am, bm = np.abs(ma), np.abs(mb)
            p = p + am * bm
            s = s + am * rb + ra * (bm + rb)
        r = (s + p * ((k + 2) * _U)) * (1.0 + (4 * k + 16) * _U) + np.abs(c) * (4 * _U) + (4 * k + 8) * _FLOOR
    return c, r


def mr_to_interval(c, r) -> IntervalArray:
    with np.errstate(over="ignore", invalid="ignore"):
        lo, hi = c - r, c + r
    bad = ~(np.isfinite(lo) & np.isfinite(hi))
    if bad.any():
        lo = np.where(bad, -_INF, lo)
        hi = np.where(bad, _INF, hi)
    return IntervalArray(lo, hi)


def det_interval_mr(m: list[list[IntervalArray]]) -> IntervalArray:
    """Determinant enclosure in midpoint-radius form; agrees with det_interval up to width."""
    n = len(m)
    mr = [[mid_rad(x.lo, x.hi) for x in row] for row in m]
    if n == 2:
        return mr_to_interval(*mr_products([(1, mr[0][0], mr[1][1]), (-1, mr[0][1], mr[1][0])]))
    if n == 3:
        c0 = mr_products([(1, mr[1][1], mr[2][2]), (-1, mr[1][2], mr[2][1])])
        c1 = mr_products([(1, mr[1][0], mr[2][2]), (-1, mr[1][2], mr[2][0])])
        c2 = mr_products([(1, mr[1][0], mr[2][1]), (-1, mr[1][1], mr[2][0])])
        return mr_to_interval(*mr_products([(1, mr[0][0], c0), (-1, mr[0][1], c1), (1, mr[0][2], c2)]))
    raise ValueError(f"unsupported dimension {n}")


def det_exact(m: Sequence[Sequence[Fraction]]) -> Fraction:
    n = len(m)
    if n == 1:
        return Fraction(m[0][0])
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    if n == 3:
        return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
    raise ValueError(f"unsupported dimension {n}")


def mid_rad(lo: np.ndarray, hi: np.ndarray):
    """Midpoint and an upper bound on the radius of ``[lo, hi]``."""
    with np.errstate(over="ignore", invalid="ignore"):
        mid = np.clip(0.5 * lo + 0.5 * hi, lo, hi)
        # a difference is exact when it lands in the subnormal range and off by
        # one relative rounding otherwise; the factor covers both
        rad = np.maximum(hi - mid, mid - lo) * (1.0 + 4 * _U)
    return mid, rad


class IntervalMatrix:
    """Interval matrix with cached midpoint-radius form for products."""

    __slots__ = ("lo", "hi", "_mid", "_rad", "_absmid")

    def __init__(self, lo, hi=None):
        self.lo = np.ascontiguousarray(lo, dtype=float)
        self.hi = self.lo if hi is None else np.ascontiguousarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 2:
            raise ValueError("interval matrix endpoints must be 2-d and congruent")
        self._mid = None

    @property
    def shape(self):
        return self.lo.shape

    def _prepare(self):
        if self._mid is None:
            mid, rad = mid_rad(self.lo, self.hi)
            self._mid, self._rad, self._absmid = mid, rad, np.abs(mid)
        return self._mid, self._rad, self._absmid

    def contains_rational(self, other: RationalMatrix) -> bool:
        return all(
            Interval(self.lo[i, j], self.hi[i, j]).contains(other[i, j])
            for i in range(other.rows) for j in range(other.cols)
        )

    def matvec(self, x: IntervalArray) -> IntervalArray:
        return iv_matmul(self, x)


def iv_matmul(a: IntervalMatrix, x: IntervalArray) -> IntervalArray:
    """Enclosure of ``A @ X`` for interval ``A`` (k x m) and ``X`` (m [x r])."""
    am, ar, aabs = a._prepare()
    k = am.shape[1]
    xl, xh = x.lo, x.hi
    if xl.shape[0] != k:
        raise ValueError(f"inner dimensions differ: {am.shape} vs {xl.shape}")
    xm, xr = mid_rad(xl, xh)
    xabs = np.abs(xm)
    g = (k + 2) * _U * 1.0000001
    with np.errstate(over="ignore", invalid="ignore"):
        c = am @ xm
        s = aabs @ (xr + g * xabs)
        if ar.any():
            s = s + ar @ (xabs + xr)
        # s is a sum of non-negative terms, so its computed value is low by
        # at most a factor (1 - gamma_{k+4}); the final additions each lose
        # at most one more rounding, all absorbed by the slack below.
        r = s * (1.0 + 2.0 * (k + 8) * _U) + np.abs(c) * (8 * _U) + (2 * k + 12) * _FLOOR
        lo = c - r
        hi = c + r
    bad = ~(np.isfinite(lo) & np.isfinite(hi))
    if bad.any():
        lo = np.where(bad, -_INF, lo)
        hi = np.where(bad, _INF, hi)
    return IntervalArray(lo, hi)


def interval_to_hex(iv: Interval) -> str:
    return f"{iv.lo.hex()} {iv.hi.hex()}"


def interval_from_hex(text: str) -> Interval:
    lo, hi = text.split()
    return Interval.from_hex(lo, hi)


def fractions_of(values: Iterable) -> list[Fraction]:
    return [Fraction(v) for v in values]
