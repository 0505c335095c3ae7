"""Sequence-space calculus for Gegenbauer expansions.

Derivatives act diagonally between Gegenbauer families once shifted:

    (D_k U)_0 = 2^k k! U_k,          (D_k U)_n = (n+k) 2^(k-1) (k-1)! U_{n+k}

maps Chebyshev coefficients of u to order-k coefficients of the k-th
derivative; Sigma is the index shift; D_k^+ ("dagger") inverts the diagonal
Sigma^k D_k on the range of pi^{>k-1}; C_k is the order-(k -> k+1) change of
basis; S is the Chebyshev antiderivative vanishing at -1 and
S^(i) = pi^{>i-1} S^i the i-fold antiderivative with zeroed leading modes.

All applications to finitely supported sequences are exact: there is no
truncation, only interval rounding.  Boundary functionals evaluate
derivatives at the endpoints through the coefficients

    alpha_{j,0} = 2^(j-1) j!,  alpha_{j,n} = 2^(j-1) (j-1)! (n+j) G(2j+n)/(G(2j) n!)

built from exact rational Gamma ratios (memoized; the table is append-only
so concurrent readers always see consistent values).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

from .interval import Interval, ZERO, ONE, isum, gamma_ratio
from .seqspace import CoeffSeq, parity_flip, xi


def _factorial_iv(n: int) -> Interval:
    return Interval.point(float(math.factorial(n)))


def apply_dk(u: CoeffSeq, k: int) -> CoeffSeq:
    """k-th derivative: Chebyshev coefficients -> order-k Gegenbauer."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if u.basis != 0:
        raise ValueError("apply_dk expects Chebyshev coefficients")
    two_km1 = Interval.point(2.0) ** (k - 1)
    fac_km1 = _factorial_iv(k - 1)
    n_out = max(len(u) - k, 1)
    coeffs = [Interval.point(2.0) ** k * _factorial_iv(k) * u.entry(k)]
    for n in range(1, n_out):
        coeffs.append(Interval.point(n + k) * two_km1 * fac_km1 * u.entry(n + k))
    return CoeffSeq(coeffs, basis=k, nu=u.nu, parity=parity_flip(u.parity, k))


def apply_shift(u: CoeffSeq, power: int = 1) -> CoeffSeq:
    if power < 0:
        raise ValueError("power must be >= 0")
    if power == 0:
        return u
    coeffs = (ZERO,) * power + u.coeffs
    return u.replace(coeffs=coeffs, parity=parity_flip(u.parity, power), check=False)


def apply_ddag(u: CoeffSeq, k: int) -> CoeffSeq:
    """Inverse of the diagonal Sigma^k D_k; zeroes the first k modes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    two_km1 = Interval.point(2.0) ** (k - 1)
    fac_km1 = _factorial_iv(k - 1)
    coeffs = [ZERO] * min(k, len(u))
    for n in range(k, len(u)):
        if n == k:
            coeffs.append(u.entry(k) / (Interval.point(2.0) ** k * _factorial_iv(k)))
        else:
            coeffs.append(u.entry(n) / (Interval.point(n) * two_km1 * fac_km1))
    if not coeffs:
        coeffs = [ZERO]
    return CoeffSeq(coeffs, basis=0, nu=u.nu, parity=u.parity, check=False)


def _apply_ck(u: CoeffSeq, k: int) -> CoeffSeq:
    """One change-of-basis step, order k -> k+1."""
    n_len = len(u)
    if k == 0:
        coeffs = [u.entry(0) - u.entry(2)]
        half = Interval.point(0.5)
        for n in range(1, n_len):
            coeffs.append(half * (u.entry(n) - u.entry(n + 2)))
    else:
        k_iv = Interval.point(k)
        coeffs = [u.entry(0) - Interval.point(2 * k) / Interval.point(2 + k) * u.entry(2)]
        for n in range(1, n_len):
            coeffs.append(k_iv / Interval.point(n + k) * u.entry(n)
                          - k_iv / Interval.point(n + k + 2) * u.entry(n + 2))
    return CoeffSeq(coeffs, basis=k + 1, nu=u.nu, parity=u.parity)


def change_basis(u: CoeffSeq, k: int, l: int) -> CoeffSeq:
    """Re-express order-k coefficients in the order-l family, k <= l."""
    if k > l:
        raise ValueError("inverse change of basis is not an operator here (k > l)")
    if u.basis != k:
        raise ValueError(f"sequence is tagged basis {u.basis}, expected {k}")
    out = u
    for j in range(k, l):
        out = _apply_ck(out.replace(basis=j, check=False), j)
    return out


def apply_s(u: CoeffSeq) -> CoeffSeq:
    """Antiderivative vanishing at -1 (finite supports only).

    The constant entry is fixed by the alternating series that cancels the
    value at -1; the factor 2 on it comes from the xi weights of the series.
    """
    if u.basis != 0:
        raise ValueError("apply_s expects Chebyshev coefficients")
    end = u.support_end()
    head = u.entry(0) - Interval.point(0.5) * u.entry(1)
    head = head + isum(
        Interval.point(-2.0 if n % 2 == 0 else 2.0) * u.entry(n)
        / Interval.point(n * n - 1)
        for n in range(2, end)
    )
    coeffs = [head]
    for n in range(1, end + 2):
        coeffs.append((u.entry(n - 1) - u.entry(n + 1)) / Interval.point(2 * n))
    parity = "even" if u.parity == "odd" else "none"
    return CoeffSeq(coeffs, basis=0, nu=u.nu, parity=parity)


def apply_si(u: CoeffSeq, i: int) -> CoeffSeq:
    """i-fold antiderivative with the first i Chebyshev modes zeroed."""
    if i < 1:
        raise ValueError("i must be >= 1")
    out = u.replace(parity="none", check=False)
    for _ in range(i):
        out = apply_s(out)
    out = out.project(i - 1, "gt")
    return out.replace(parity=parity_flip(u.parity, i))


# -- boundary functionals ---------------------------------------------------


@lru_cache(maxsize=None)
def alpha_bc(j: int, n: int) -> Interval:
    """Endpoint-evaluation coefficients alpha_{j,n}."""
    if j < 0 or n < 0:
        raise ValueError("j, n must be >= 0")
    if j == 0:
        return ONE
    base = Interval.point(2.0) ** (j - 1)
    if n == 0:
        return base * _factorial_iv(j)
    return base * _factorial_iv(j - 1) * Interval.point(n + j) * gamma_ratio(j, n)


def boundary_eval(u: CoeffSeq, j: int, endpoint: int) -> Interval:
    """Enclosure of the j-th derivative of the series at x = endpoint."""
    if endpoint not in (1, -1):
        raise ValueError("endpoint must be +1 or -1")
    if u.basis != 0:
        raise ValueError("boundary_eval expects Chebyshev coefficients")
    end = u.support_end()
    if j == 0:
        total = u.entry(0)
        for n in range(1, end):
            c = u.entry(n)
            if c.lo == 0.0 and c.hi == 0.0:
                continue
            s = 1.0 if (endpoint == 1 or n % 2 == 0) else -1.0
            total = total + Interval.point(2.0 * s) * c
        return total
    total = ZERO
    for n in range(0, max(end - j, 0)):
        c = u.entry(n + j)
        if c.lo == 0.0 and c.hi == 0.0:
            continue
        s = 1.0 if (endpoint == 1 or n % 2 == 0) else -1.0
        total = total + Interval.point(2.0 * s) * alpha_bc(j, n) * c
    return total


def bc_on_unit(j: int, endpoint: int, n: int) -> Interval:
    """boundary_eval applied to the unit coefficient vector e_n."""
    if j == 0:
        s = 1.0 if (endpoint == 1 or n % 2 == 0) else -1.0
        return Interval.point(s * xi(n))
    if n < j:
        return ZERO
    s = 1.0 if (endpoint == 1 or (n - j) % 2 == 0) else -1.0
    return Interval.point(2.0 * s) * alpha_bc(j, n - j)


@dataclass(frozen=True)
class BCRow:
    """One boundary condition: sum_j weights[ep][j] * d^j u(ep)."""

    order: int                      # 2m, the number of derivative orders
    weights: tuple                  # weights[ep][j], ep 0 -> x=-1, 1 -> x=+1

    def apply(self, u: CoeffSeq) -> Interval:
        total = ZERO
        for ep in (0, 1):
            endpoint = -1 if ep == 0 else 1
            for j in range(self.order):
                w = self.weights[ep][j]
                if w.lo == 0.0 and w.hi == 0.0:
                    continue
                total = total + w * boundary_eval(u, j, endpoint)
        return total

    def on_unit(self, n: int) -> Interval:
        total = ZERO
        for ep in (0, 1):
            endpoint = -1 if ep == 0 else 1
            for j in range(self.order):
                w = self.weights[ep][j]
                if w.lo == 0.0 and w.hi == 0.0:
                    continue
                total = total + w * bc_on_unit(j, endpoint, n)
        return total


@dataclass(frozen=True)
class BoundarySpec:
    """2m boundary conditions: m rows at x=-1 (beta) and m at x=+1 (gamma).

    Each row lists its coefficients over derivative orders j = 0..2m-1.
    """

    m: int
    rows_left: tuple
    rows_right: tuple

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if len(self.rows_left) != self.m or len(self.rows_right) != self.m:
            raise ValueError("need exactly m rows per endpoint")
        for row in list(self.rows_left) + list(self.rows_right):
            if len(row) != 2 * self.m:
                raise ValueError("each row needs 2m coefficients")

    @staticmethod
    def build(m, rows_left, rows_right) -> "BoundarySpec":
        def conv(rows):
            return tuple(
                tuple(w if isinstance(w, Interval) else Interval.point(w) for w in row)
                for row in rows
            )
        return BoundarySpec(m, conv(rows_left), conv(rows_right))

    def functionals(self):
        """All 2m condition functionals, left endpoint rows first."""
        rows = []
        zero_side = tuple(ZERO for _ in range(2 * self.m))
        for row in self.rows_left:
            rows.append(BCRow(2 * self.m, (tuple(row), zero_side)))
        for row in self.rows_right:
            rows.append(BCRow(2 * self.m, (zero_side, tuple(row))))
        return rows

    def to_json(self):
        return {
            "m": self.m,
            "rows_left": [[w.to_hex() for w in row] for row in self.rows_left],
            "rows_right": [[w.to_hex() for w in row] for row in self.rows_right],
        }

    @staticmethod
    def from_json(data) -> "BoundarySpec":
        def conv(rows):
            return tuple(tuple(Interval.from_hex(p) for p in row) for row in rows)
        return BoundarySpec(data["m"], conv(data["rows_left"]), conv(data["rows_right"]))


def dirichlet_spec() -> BoundarySpec:
    return BoundarySpec.build(1, [[1.0, 0.0]], [[1.0, 0.0]])


def ks_neumann_spec() -> BoundarySpec:
    """d_x v = d_x^3 v = 0 at both endpoints (m = 2)."""
    return BoundarySpec.build(
        2,
        [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
        [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
    )
