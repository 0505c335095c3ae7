"""Coefficient sequences in the weighted l1 space.

A :class:`CoeffSeq` stores finitely many interval coefficients of a series
``U_0 + 2 sum_{n>=1} U_n G_n^(k)`` in the Gegenbauer family of order
``basis`` (order 0 is Chebyshev).  The norm is

    ||U||_nu = |U_0| + 2 sum_{n>=1} |U_n| nu^n,

which makes the space a Banach algebra for the Chebyshev product.  Parity is
a tag plus an enforced zero pattern: storage always covers all indices so
that operator index formulas stay literal, while tagged sequences must have
exact zeros on the forbidden indices.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .interval import Interval, ZERO, ONE, imax, isum

PARITIES = ("none", "odd", "even")


def xi(n: int) -> int:
    """Weight 1 for n = 0 and 2 for n >= 1 (the l1 norm weights)."""
    return 1 if n == 0 else 2


def parity_allows(parity: str, n: int) -> bool:
    if parity == "none":
        return True
    if parity == "odd":
        return n % 2 == 1
    if parity == "even":
        return n % 2 == 0
    raise ValueError(f"unknown parity {parity!r}")


def parity_flip(parity: str, times: int = 1) -> str:
    if parity == "none" or times % 2 == 0:
        return parity
    return "even" if parity == "odd" else "odd"


def parity_product(p: str, q: str) -> str:
    if p == "none" or q == "none":
        return "none"
    return "even" if p == q else "odd"


def active_indices(parity: str, hi: int, lo: int = 0):
    """Indices n in [lo, hi) allowed by the parity restriction."""
    return [n for n in range(lo, hi) if parity_allows(parity, n)]


class BasisMismatchError(ValueError):
    pass


class ParityError(ValueError):
    pass


class CoeffSeq:
    __slots__ = ("coeffs", "basis", "nu", "parity")

    def __init__(self, coeffs, basis=0, nu=1.0, parity="none", check=True):
        cs = tuple(c if isinstance(c, Interval) else Interval.point(c) for c in coeffs)
        if parity not in PARITIES:
            raise ParityError(f"unknown parity {parity!r}")
        if nu < 1.0:
            raise ValueError("nu must be >= 1")
        if check and parity != "none":
            for n, c in enumerate(cs):
                if not parity_allows(parity, n) and not (c.lo == 0.0 and c.hi == 0.0):
                    raise ParityError(f"parity {parity} violated at index {n}: {c}")
        self.coeffs = cs
        self.basis = int(basis)
        self.nu = float(nu)
        self.parity = parity

    # -- construction helpers ----------------------------------------------

    @staticmethod
    def zeros(length, basis=0, nu=1.0, parity="none"):
        return CoeffSeq([ZERO] * length, basis, nu, parity, check=False)

    @staticmethod
    def from_floats(vals, basis=0, nu=1.0, parity="none"):
        return CoeffSeq([Interval.point(v) for v in vals], basis, nu, parity)

    def replace(self, coeffs=None, basis=None, parity=None, check=True):
        return CoeffSeq(
            self.coeffs if coeffs is None else coeffs,
            self.basis if basis is None else basis,
            self.nu,
            self.parity if parity is None else parity,
            check=check,
        )

    # -- basic accessors ----------------------------------------------------

    def __len__(self):
        return len(self.coeffs)

    def entry(self, n: int) -> Interval:
        if 0 <= n < len(self.coeffs):
            return self.coeffs[n]
        return ZERO

    def support_end(self) -> int:
        """1 + largest index with a coefficient not identically zero."""
        for n in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[n]
            if c.lo != 0.0 or c.hi != 0.0:
                return n + 1
        return 0

    def trimmed(self) -> "CoeffSeq":
        end = max(self.support_end(), 1)
        return self.replace(coeffs=self.coeffs[:end], check=False)

    def padded(self, length: int) -> "CoeffSeq":
        if len(self.coeffs) >= length:
            return self
        return self.replace(coeffs=self.coeffs + (ZERO,) * (length - len(self.coeffs)), check=False)

    def mids(self) -> np.ndarray:
        return np.array([c.mid() for c in self.coeffs])

    # -- linear structure -----------------------------------------------------

    def _require_compatible(self, other: "CoeffSeq"):
        if self.basis != other.basis:
            raise BasisMismatchError(f"basis {self.basis} vs {other.basis}")
        if self.nu != other.nu:
            raise BasisMismatchError(f"nu {self.nu} vs {other.nu}")

    def __add__(self, other: "CoeffSeq") -> "CoeffSeq":
        self._require_compatible(other)
        n = max(len(self), len(other))
        coeffs = [self.entry(i) + other.entry(i) for i in range(n)]
        par = self.parity if self.parity == other.parity else "none"
        return CoeffSeq(coeffs, self.basis, self.nu, par, check=False)

    def __sub__(self, other: "CoeffSeq") -> "CoeffSeq":
        return self + other.scale(Interval.point(-1.0))

    def scale(self, c) -> "CoeffSeq":
        c = c if isinstance(c, Interval) else Interval.point(c)
        return self.replace(coeffs=[ci * c for ci in self.coeffs], check=False)

    # -- norm ---------------------------------------------------------------

    def norm(self) -> Interval:
        """Rigorous enclosure of |U_0| + 2 sum |U_n| nu^n."""
        nu = Interval.point(self.nu)
        total = abs(self.entry(0))
        pw = ONE
        for n in range(1, len(self.coeffs)):
            pw = pw * nu
            c = self.coeffs[n]
            if c.lo == 0.0 and c.hi == 0.0:
                continue
            total = total + Interval.point(2.0) * abs(c) * pw
        return total

    # -- projections ----------------------------------------------------------

    def project(self, N: int, side: str) -> "CoeffSeq":
        if side == "leq":
            coeffs = [self.entry(n) if n <= N else ZERO for n in range(len(self.coeffs))]
        elif side == "gt":
            coeffs = [ZERO if n <= N else self.entry(n) for n in range(len(self.coeffs))]
        else:
            raise ValueError("side must be 'leq' or 'gt'")
        return self.replace(coeffs=coeffs, check=False)

    # -- convolution ----------------------------------------------------------

    def conv(self, other: "CoeffSeq") -> "CoeffSeq":
        """Chebyshev product: (U*V)_n = sum_{n' in Z} U_|n'| V_|n-n'|."""
        self._require_compatible(other)
        if self.basis != 0:
            raise BasisMismatchError("convolution defined for the Chebyshev basis only")
        u = self.trimmed().coeffs
        v = other.trimmed().coeffs
        mu, mv = len(u) - 1, len(v) - 1
        out = []
        for n in range(mu + mv + 1):
            acc = ZERO
            for np_ in range(-mv, mu + 1):
                iu = abs(np_)
                iv_ = abs(n - np_)
                if iu <= mu and iv_ <= mv:
                    cu = u[iu]
                    if cu.lo == 0.0 and cu.hi == 0.0:
                        continue
                    cv = v[iv_]
                    if cv.lo == 0.0 and cv.hi == 0.0:
                        continue
                    acc = acc + cu * cv
            out.append(acc)
        par = parity_product(self.parity, other.parity)
        return CoeffSeq(out, 0, self.nu, par)

    def conv_power(self, k: int) -> "CoeffSeq":
        if k < 0:
            raise ValueError("negative power")
        out = unit_seq(self.nu)
        for _ in range(k):
            out = out.conv(self)
        return out

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, x) -> Interval:
        """Enclosure of the series at x through the three-term recurrence."""
        x = x if isinstance(x, Interval) else Interval.point(x)
        if x.lo < -1.0 or x.hi > 1.0:
            raise ValueError(f"evaluation point {x} outside [-1, 1]")
        end = self.support_end()
        total = self.entry(0)
        if end <= 1:
            return total
        k = self.basis
        two_x = Interval.point(2.0) * x
        if k == 0:
            gm2, gm1 = ONE, x  # T_0, T_1
        else:
            gm2, gm1 = ONE, Interval.point(2 * k) * x  # C_0, C_1
        two = Interval.point(2.0)
        for n in range(1, end):
            g = gm1 if n == 1 else None
            if n >= 2:
                if k == 0:
                    g = two_x * gm1 - gm2
                else:
                    g = (two_x * Interval.point(n + k - 1) * gm1
                         - Interval.point(n + 2 * k - 2) * gm2) / Interval.point(n)
                gm2, gm1 = gm1, g
            c = self.coeffs[n]
            if not (c.lo == 0.0 and c.hi == 0.0):
                total = total + two * c * g
        return total

    # -- serialization ----------------------------------------------------------

    def to_json(self):
        return {
            "basis_order": self.basis,
            "nu": float.hex(self.nu),
            "parity": self.parity,
            "coeffs": [c.to_hex() for c in self.coeffs],
        }

    @staticmethod
    def from_json(data) -> "CoeffSeq":
        return CoeffSeq(
            [Interval.from_hex(p) for p in data["coeffs"]],
            basis=data["basis_order"],
            nu=float.fromhex(data["nu"]),
            parity=data["parity"],
        )

    def __repr__(self):
        return (f"CoeffSeq(len={len(self.coeffs)}, basis={self.basis}, "
                f"nu={self.nu}, parity={self.parity!r})")


def unit_seq(nu: float) -> CoeffSeq:
    """The convolution identity (1, 0, 0, ...)."""
    return CoeffSeq([ONE], 0, nu, "even", check=False)


def basis_ek(k: int, nu: float = 1.0) -> CoeffSeq:
    """Normalized Schauder basis vector E_k: unit nu-norm by construction."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return CoeffSeq([ONE], 0, nu, "even", check=False)
    entry = ONE / (Interval.point(2.0) * Interval.point(nu) ** k)
    coeffs = [ZERO] * k + [entry]
    return CoeffSeq(coeffs, 0, nu, "odd" if k % 2 else "even", check=False)


def unit_e(n: int, nu: float = 1.0, basis: int = 0) -> CoeffSeq:
    """Unit coefficient vector e_n (entry exactly 1 at n)."""
    coeffs = [ZERO] * n + [ONE]
    return CoeffSeq(coeffs, basis, nu, "odd" if n % 2 else "even", check=False)


def op_norm(col_norms, N: int, nu: float, tail_bound=None) -> Interval:
    """l1_nu operator norm from raw column norms ||A e_n||_nu, n = 0..N.

    ``tail_bound`` must dominate sup_{n>N} ||A E_n||_nu (already normalized);
    omit it for operators with range and domain inside pi^{<=N}.
    """
    if len(col_norms) != N + 1:
        raise ValueError("need one column norm per n = 0..N")
    vals = []
    nu_iv = Interval.point(nu)
    pw = ONE
    for n, cn in enumerate(col_norms):
        if n > 0:
            pw = pw * nu_iv
        vals.append(cn / (Interval.point(xi(n)) * pw))
    if tail_bound is not None:
        vals.append(tail_bound)
    return imax(*vals)


def seq_from_fractions(fracs, basis=0, nu=1.0, parity="none") -> CoeffSeq:
    return CoeffSeq([Interval.from_fraction(Fraction(f)) for f in fracs], basis, nu, parity)
