"""Directed-rounding interval arithmetic.

Every operation returns an interval that contains the exact real result for
any choice of points in the operands (containment).  Rounding is done in
software, by stepping endpoints to the next representable float with
``math.nextafter``, so the global FP rounding mode is never touched and the
arithmetic is safe to use from any number of threads.

Endpoints are only widened when an operation is actually inexact; exactness
is detected with error-free transformations (Knuth's TwoSum, Dekker's
two-product).  This keeps dyadic computations (projections, shifts, parity
zero patterns, small-integer arithmetic) bit-exact, which several structural
invariants rely on.

Overflow does not raise: a non-finite endpoint saturates the result to the
whole real line, so downstream certification checks (which require strict
finite inequalities) fail safely instead of silently.
"""

from __future__ import annotations

import math
from fractions import Fraction

_INF = math.inf
_SPLIT = 134217729.0  # 2**27 + 1, Veltkamp splitting constant
_BIG = 2.0**970       # beyond this, splitting may overflow
_TINY = 2.0**-967     # below this, product error terms may be inexact


class IntervalDivisionError(ZeroDivisionError):
    """Division by an interval containing zero."""


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _sum_err(a: float, b: float, s: float) -> float:
    """Exact error of s = fl(a+b) (TwoSum); requires s finite."""
    ap = s - b
    bp = s - ap
    return (a - ap) + (b - bp)


def _prod_err(a: float, b: float, p: float):
    """Exact error of p = fl(a*b), or None if it cannot be trusted."""
    if p == 0.0:
        return 0.0 if (a == 0.0 or b == 0.0) else None
    q = abs(p)
    # guards: Veltkamp splitting must not overflow and the error term must
    # stay in the normal range, else fall back to unconditional widening
    if q >= _BIG or q <= _TINY or abs(a) >= _BIG or abs(b) >= _BIG:
        return None
    aa = a * _SPLIT
    ah = aa - (aa - a)
    al = a - ah
    bb = b * _SPLIT
    bh = bb - (bb - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    if math.isnan(err):
        return None
    return err


class Interval:
    """Closed interval [lo, hi] with outward-rounded endpoint arithmetic."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        lo = float(lo)
        hi = float(hi)
        if math.isnan(lo) or math.isnan(hi):
            lo, hi = -_INF, _INF
        if lo > hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def point(x) -> "Interval":
        return Interval(float(x), float(x))

    @staticmethod
    def whole() -> "Interval":
        return Interval(-_INF, _INF)

    @staticmethod
    def from_fraction(q) -> "Interval":
        """Tight enclosure of an exact rational."""
        q = Fraction(q)
        f = float(q)
        if Fraction(f) == q:
            return Interval(f, f)
        lo, hi = _down(f), _up(f)
        if Fraction(lo) > q:
            lo = _down(lo)
        if Fraction(hi) < q:
            hi = _up(hi)
        return Interval(lo, hi)

    # -- predicates / accessors -------------------------------------------

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def mid(self) -> float:
        if not self.is_finite:
            return 0.0
        m = 0.5 * (self.lo + self.hi)
        if not math.isfinite(m):
            m = 0.5 * self.lo + 0.5 * self.hi
        return m

    def rad(self) -> float:
        m = self.mid()
        return _up(max(self.hi - m, m - self.lo))

    def width(self) -> float:
        return _up(self.hi - self.lo)

    def mag(self) -> float:
        """sup{|x| : x in self}."""
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        """inf{|x| : x in self}."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x) -> bool:
        if isinstance(x, Fraction):
            return Fraction(self.lo) <= x <= Fraction(self.hi)
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def overlaps(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(x) -> "Interval":
        if isinstance(x, Interval):
            return x
        return Interval.point(x)

    def __add__(self, other):
        o = Interval._coerce(other)
        lo = self.lo + o.lo
        if math.isfinite(lo):
            if _sum_err(self.lo, o.lo, lo) < 0.0:
                lo = _down(lo)
        else:
            lo = -_INF
        hi = self.hi + o.hi
        if math.isfinite(hi):
            if _sum_err(self.hi, o.hi, hi) > 0.0:
                hi = _up(hi)
        else:
            hi = _INF
        return Interval(lo, hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-Interval._coerce(other))

    def __rsub__(self, other):
        return Interval._coerce(other) + (-self)

    def __mul__(self, other):
        o = Interval._coerce(other)
        cands = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        lo = _INF
        hi = -_INF
        for a, b in cands:
            p = a * b
            if math.isnan(p):
                return Interval.whole()
            err = _prod_err(a, b, p)
            if err is None:
                plo, phi = _down(p), _up(p)
            elif err > 0.0:
                plo, phi = p, _up(p)
            elif err < 0.0:
                plo, phi = _down(p), p
            else:
                plo = phi = p
            if plo < lo:
                lo = plo
            if phi > hi:
                hi = phi
        if math.isinf(lo) or math.isinf(hi):
            return Interval.whole()
        return Interval(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Interval._coerce(other)
        if o.contains_zero():
            raise IntervalDivisionError(f"division by {o!r} containing zero")
        lo = _INF
        hi = -_INF
        for a, b in ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)):
            q = a / b
            if math.isnan(q):
                return Interval.whole()
            # q is exact iff q*b reproduces a with no two-product error
            p = q * b
            err = _prod_err(q, b, p)
            if err == 0.0 and p == a:
                qlo = qhi = q
            else:
                qlo, qhi = _down(q), _up(q)
            if qlo < lo:
                lo = qlo
            if qhi > hi:
                hi = qhi
        if math.isinf(lo) or math.isinf(hi):
            return Interval.whole()
        return Interval(lo, hi)

    def __rtruediv__(self, other):
        return Interval._coerce(other) / self

    def __abs__(self):
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        if n == 0:
            return Interval(1.0, 1.0)
        out = self
        for _ in range(n - 1):
            out = out * self
        if n % 2 == 0 and self.contains_zero():
            out = Interval(0.0, out.hi)
        return out

    def sqrt(self):
        """Enclosure of sqrt over the interval; requires lo >= 0."""
        if self.lo < 0.0:
            raise ValueError(f"sqrt of interval {self!r} with negative part")
        lo = math.sqrt(self.lo)
        hi = math.sqrt(self.hi)
        if Fraction(lo) * Fraction(lo) > Fraction(self.lo):
            lo = _down(lo)
        if math.isfinite(hi) and Fraction(hi) * Fraction(hi) < Fraction(self.hi):
            hi = _up(hi)
        return Interval(max(lo, 0.0), hi)

    # -- lattice -----------------------------------------------------------

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval") -> "Interval":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("empty intersection")
        return Interval(lo, hi)

    # -- serialization -----------------------------------------------------

    def to_hex(self):
        return [float.hex(self.lo), float.hex(self.hi)]

    @staticmethod
    def from_hex(pair) -> "Interval":
        return Interval(float.fromhex(pair[0]), float.fromhex(pair[1]))

    # -- misc ----------------------------------------------------------------

    def __eq__(self, other):
        return isinstance(other, Interval) and self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __str__(self):
        return f"[{self.lo:.17g}, {self.hi:.17g}]"


ZERO = Interval(0.0, 0.0)
ONE = Interval(1.0, 1.0)


def imax(*vals) -> Interval:
    """Enclosure of max over interval arguments."""
    ivs = [Interval._coerce(v) for v in vals]
    return Interval(max(v.lo for v in ivs), max(v.hi for v in ivs))


def isum(vals) -> Interval:
    out = ZERO
    for v in vals:
        out = out + v
    return out


def gamma_ratio(k: int, n: int) -> Interval:
    """Enclosure of Gamma(2k+n) / (Gamma(2k) n!) for k >= 1, n >= 0.

    Computed as the telescoping product of rationals
    prod_{m=1}^{n} (2k+m-1)/m, never evaluating Gamma itself, so the
    result stays usable for indices where Gamma would overflow.
    """
    if k < 1 or n < 0:
        raise ValueError("gamma_ratio requires k >= 1, n >= 0")
    out = ONE
    for m in range(1, n + 1):
        out = out * (Interval.point(2 * k + m - 1) / Interval.point(m))
    return out
