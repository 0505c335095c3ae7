"""Vectorized interval matrices for the large rigorous linear-algebra steps.

A real interval matrix is a pair of float arrays (lo, hi); a complex one is a
pair of real interval matrices (re, im).  All operations round outward
unconditionally with ``np.nextafter`` (one ulp per elementary step), which is
sound and cheap; the scalar :class:`pdecert.interval.Interval` is used where
bit-exactness matters, this module where throughput matters (operator-norm
bounds, pseudo-diagonalization residuals, inverse enclosures).

Matrix products accumulate along the contraction axis with per-step directed
rounding, so no assumption is made about BLAS summation order.
"""

from __future__ import annotations

import numpy as np

from .interval import Interval

_INF = np.inf


def _dn(a):
    return np.nextafter(a, -_INF)


def _uprnd(a):
    return np.nextafter(a, _INF)


class IMat:
    """Interval matrix: entrywise [lo, hi], lo <= hi."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if lo.shape != hi.shape:
            raise ValueError("shape mismatch")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("non-finite interval matrix")
        if np.any(lo > hi):
            raise ValueError("lo > hi")
        self.lo = lo
        self.hi = hi

    # -- constructors ------------------------------------------------------

    @staticmethod
    def exact(arr) -> "IMat":
        a = np.asarray(arr, dtype=np.float64)
        return IMat(a.copy(), a.copy())

    @staticmethod
    def zeros(shape) -> "IMat":
        return IMat(np.zeros(shape), np.zeros(shape))

    @staticmethod
    def eye(n) -> "IMat":
        return IMat.exact(np.eye(n))

    @staticmethod
    def from_scalars(rows) -> "IMat":
        lo = np.array([[iv.lo for iv in row] for row in rows])
        hi = np.array([[iv.hi for iv in row] for row in rows])
        return IMat(lo, hi)

    # -- accessors -----------------------------------------------------------

    @property
    def shape(self):
        return self.lo.shape

    def entry(self, i, j) -> Interval:
        return Interval(self.lo[i, j], self.hi[i, j])

    def mid(self):
        return 0.5 * (self.lo + self.hi)

    def submatrix(self, rows, cols) -> "IMat":
        r = np.asarray(rows)
        c = np.asarray(cols)
        return IMat(self.lo[np.ix_(r, c)], self.hi[np.ix_(r, c)])

    def copy(self) -> "IMat":
        return IMat(self.lo.copy(), self.hi.copy())

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other) -> "IMat":
        o = other if isinstance(other, IMat) else IMat.exact(other)
        return IMat(_dn(self.lo + o.lo), _uprnd(self.hi + o.hi))

    def __sub__(self, other) -> "IMat":
        o = other if isinstance(other, IMat) else IMat.exact(other)
        return IMat(_dn(self.lo - o.hi), _uprnd(self.hi - o.lo))

    def __neg__(self) -> "IMat":
        return IMat(-self.hi, -self.lo)

    def scale(self, c: Interval) -> "IMat":
        p1, p2 = self.lo * c.lo, self.lo * c.hi
        p3, p4 = self.hi * c.lo, self.hi * c.hi
        lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
        hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
        return IMat(_dn(lo), _uprnd(hi))

    def __matmul__(self, other) -> "IMat":
        o = other if isinstance(other, IMat) else IMat.exact(other)
        n, k = self.shape
        k2, m = o.shape
        if k != k2:
            raise ValueError("inner dimension mismatch")
        clo = np.zeros((n, m))
        chi = np.zeros((n, m))
        for t in range(k):
            alo = self.lo[:, t]
            ahi = self.hi[:, t]
            if not (np.any(alo) or np.any(ahi)):
                continue
            blo = o.lo[t]
            bhi = o.hi[t]
            if not (np.any(blo) or np.any(bhi)):
                continue
            p1 = np.outer(alo, blo)
            p2 = np.outer(alo, bhi)
            p3 = np.outer(ahi, blo)
            p4 = np.outer(ahi, bhi)
            tlo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
            thi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
            clo = _dn(clo + _dn(tlo))
            chi = _uprnd(chi + _uprnd(thi))
        return IMat(clo, chi)

    def abs_upper(self):
        """Entrywise upper bound of |entry|."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def col_sums_upper(self, weights=None):
        """Upper bound of sum_k w_k |M_kj| per column (directed rounding)."""
        a = self.abs_upper()
        if weights is not None:
            a = _uprnd(a * np.asarray(weights)[:, None])
        out = np.zeros(a.shape[1])
        for k in range(a.shape[0]):
            out = _uprnd(out + a[k])
        return out


class CMat:
    """Complex interval matrix as a (re, im) pair of IMat."""

    __slots__ = ("re", "im")

    def __init__(self, re: IMat, im: IMat):
        if re.shape != im.shape:
            raise ValueError("shape mismatch")
        self.re = re
        self.im = im

    @staticmethod
    def exact(arr) -> "CMat":
        a = np.asarray(arr, dtype=np.complex128)
        return CMat(IMat.exact(a.real), IMat.exact(a.imag))

    @staticmethod
    def from_real(m: IMat) -> "CMat":
        return CMat(m, IMat.zeros(m.shape))

    @property
    def shape(self):
        return self.re.shape

    def __add__(self, other) -> "CMat":
        o = CMat._coerce(other)
        return CMat(self.re + o.re, self.im + o.im)

    def __sub__(self, other) -> "CMat":
        o = CMat._coerce(other)
        return CMat(self.re - o.re, self.im - o.im)

    def __neg__(self) -> "CMat":
        return CMat(-self.re, -self.im)

    def __matmul__(self, other) -> "CMat":
        o = CMat._coerce(other)
        re = (self.re @ o.re) - (self.im @ o.im)
        im = (self.re @ o.im) + (self.im @ o.re)
        return CMat(re, im)

    @staticmethod
    def _coerce(x) -> "CMat":
        if isinstance(x, CMat):
            return x
        if isinstance(x, IMat):
            return CMat.from_real(x)
        a = np.asarray(x)
        if np.iscomplexobj(a):
            return CMat.exact(a)
        return CMat.from_real(IMat.exact(a))

    def abs_upper(self):
        """Entrywise upper bound of |re + i im|."""
        r = self.re.abs_upper()
        m = self.im.abs_upper()
        s = _uprnd(_uprnd(r * r) + _uprnd(m * m))
        return _uprnd(np.sqrt(s))

    def col_sums_upper(self, weights=None):
        a = self.abs_upper()
        if weights is not None:
            a = _uprnd(a * np.asarray(weights)[:, None])
        out = np.zeros(a.shape[1])
        for k in range(a.shape[0]):
            out = _uprnd(out + a[k])
        return out

    def entry(self, i, j):
        return (self.re.entry(i, j), self.im.entry(i, j))


def opnorm_upper(M, row_weights, col_weights) -> float:
    """Upper bound of the weighted l1 operator norm.

    ``max_j (1/col_weights[j]) sum_k row_weights[k] |M_kj]|`` — with weights
    xi_n nu^n this is the l1_nu operator norm of the matrix block.
    """
    sums = M.col_sums_upper(row_weights)
    cw = np.asarray(col_weights)
    if np.any(cw <= 0):
        raise ValueError("column weights must be positive")
    vals = _uprnd(sums / cw)
    return float(vals.max()) if vals.size else 0.0


def xi_weights(n: int, nu: float = 1.0, offset: int = 0):
    """Upper-rounded weights xi_k nu^k for k = offset..offset+n-1."""
    out = np.empty(n)
    for idx in range(n):
        k = offset + idx
        w = Interval.point(nu) ** k
        out[idx] = _uprnd((2.0 if k >= 1 else 1.0) * w.hi)
    return out


def xi_weights_lower(n: int, nu: float = 1.0, offset: int = 0):
    out = np.empty(n)
    for idx in range(n):
        k = offset + idx
        w = Interval.point(nu) ** k
        out[idx] = _dn((2.0 if k >= 1 else 1.0) * w.lo)
    return out


def enclose_inverse(P, weights):
    """Certified entrywise enclosure of P**-1 for a float matrix P.

    Returns ``(enc, norm_up)`` where ``enc`` is an IMat/CMat containing the
    exact inverse entrywise and ``norm_up`` bounds the weighted l1 operator
    norm of the exact inverse.  Uses the Neumann-series argument: with Q an
    approximate inverse and R = I - QP, if ||R|| < 1 then
    P**-1 = Q + RQ + R^2 P**-1 and ||P**-1 e_j|| <= ||Q e_j|| / (1 - ||R||).

    Raises ArithmeticError when the residual is not contracting.
    """
    P = np.asarray(P)
    n = P.shape[0]
    w = np.asarray(weights, dtype=np.float64)
    complex_case = np.iscomplexobj(P)
    Q = np.linalg.inv(P)
    if complex_case:
        Pm = CMat.exact(P)
        Qm = CMat.exact(Q)
        Id = CMat.from_real(IMat.eye(n))
    else:
        Pm = IMat.exact(P)
        Qm = IMat.exact(Q)
        Id = IMat.eye(n)
    R = Id - (Qm @ Pm)
    rho = opnorm_upper(R, w, w)
    if rho >= 1.0:
        raise ArithmeticError(f"inverse enclosure failed: residual norm {rho} >= 1")
    qcols = _uprnd(Qm.col_sums_upper(w) / w)  # ||Q e_j||_w / w_j
    denom = _dn(1.0 - rho)
    # per-column defect of the truncation Q + RQ, in the weighted column norm
    dcol = _uprnd(_uprnd(_uprnd(rho * rho) * _uprnd(qcols * w)) / denom)
    pad_hi = _uprnd(dcol[None, :] / w[:, None])
    pad = IMat(-pad_hi, pad_hi)
    if complex_case:
        enc = Qm + (R @ Qm) + CMat(pad, pad.copy())
    else:
        enc = Qm + (R @ Qm) + pad
    norm_up = _uprnd(float(qcols.max()) / denom) if n else 0.0
    return enc, norm_up


def interval_matvec(M: IMat, v: IMat) -> IMat:
    """M @ v for a column vector given as an (n,1) IMat."""
    return M @ v
