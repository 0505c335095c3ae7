"""Newton-Kantorovich certification of steady states.

Given a problem F(U) = U + coeff * prod_i (K_i U)^(j_i) + sum_l c_l K_(i_l) U
+ Psi on the weighted l1 space, a numerical approximation Ubar and a dense
approximate inverse A0 of the truncated Jacobian, this module evaluates the
radii-polynomial bounds

    Y   >= ||A F(Ubar)||,
    Z1  >= ||I - A DF(Ubar)||,
    Z2 r >= ||A (DF(Ubar+h) - DF(Ubar))||   for ||h|| <= r,

with A = A0 + pi^{>N}, and finds an admissible contraction radius r with

    Z2 r^2 / 2 - (1 - Z1) r + Y < 0   and   Z1 + Z2 r < 1,

all inequalities verified in interval arithmetic.  Success certifies a
unique zero of F within distance r of Ubar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .interval import Interval, ZERO, ONE, imax, isum
from .ivarray import IMat, opnorm_upper, xi_weights
from .linsolve import LinearBVP, gamma_bound
from .numerics import TruncatedResidual
from .seqspace import CoeffSeq, active_indices, unit_seq, unit_e, xi


class CertificationError(RuntimeError):
    pass


@dataclass
class ProblemSpec:
    """A concrete semilinear problem instance in sequence space."""

    name: str
    bvp: LinearBVP
    N: int
    alpha: Interval
    coeff: Interval          # coefficient of the nonlinear product
    exponents: tuple         # (j_0, ..., j_{2m-1})
    linear_terms: tuple      # ((Interval, i), ...)
    psi: CoeffSeq
    ops: dict                # i -> solution/compact operator (K_i)

    def __post_init__(self):
        if len(self.exponents) != 2 * self.bvp.m:
            raise ValueError("need one exponent per derivative order 0..2m-1")
        if any(j < 0 for j in self.exponents):
            raise ValueError("exponents must be nonnegative")
        for i in self.needed_indices():
            if i not in self.ops:
                raise ValueError(f"operator K_{i} not supplied")
        if 0 not in self.ops:
            raise ValueError("K_0 (the solution operator) is always required")

    @property
    def m(self):
        return self.bvp.m

    @property
    def nu(self):
        return self.bvp.nu

    @property
    def parity(self):
        return self.bvp.parity

    def needed_indices(self):
        out = {0}
        out.update(i for i, j in enumerate(self.exponents) if j > 0)
        out.update(i for _, i in self.linear_terms)
        return sorted(out)

    def degree(self):
        return sum(self.exponents)


# -- rigorous evaluation of F and DF ------------------------------------------


def eval_F(u: CoeffSeq, p: ProblemSpec) -> CoeffSeq:
    """Exact (interval) residual; finite because all pieces are banded."""
    out = u
    factors = {i: p.ops[i].apply(u) for i, j in enumerate(p.exponents) if j > 0}
    if factors and not (p.coeff.lo == 0.0 and p.coeff.hi == 0.0):
        prod = None
        for i, j in enumerate(p.exponents):
            for _ in range(j):
                prod = factors[i] if prod is None else prod.conv(factors[i])
        out = out + prod.scale(p.coeff)
    for c, i in p.linear_terms:
        out = out + p.ops[i].apply(u).scale(c)
    out = out + p.psi
    return out


def multipliers(ubar: CoeffSeq, p: ProblemSpec) -> dict:
    """The convolution multipliers V_i with DF(Ubar) = I + sum_i V_i K_i."""
    factors = {i: p.ops[i].apply(ubar) for i, j in enumerate(p.exponents) if j > 0}
    mults = {}
    for i, j in enumerate(p.exponents):
        if j == 0:
            continue
        v = unit_seq(p.nu).scale(p.coeff * Interval.point(j))
        for l, jl in enumerate(p.exponents):
            power = jl - 1 if l == i else jl
            for _ in range(power):
                v = v.conv(factors[l])
        mults[i] = v
    for c, i in p.linear_terms:
        extra = unit_seq(p.nu).scale(c)
        mults[i] = mults[i] + extra if i in mults else extra
    return mults


def df_columns(p: ProblemSpec, mults: dict, rows: int) -> IMat:
    """DF(Ubar) pi^{<=N} as an interval matrix with `rows` rows."""
    n1 = p.N + 1
    lo = np.zeros((rows, n1))
    hi = np.zeros((rows, n1))
    for n in active_indices(p.parity, n1):
        col = unit_e(n, p.nu)
        acc = col
        for i, v in mults.items():
            acc = acc + v.conv(p.ops[i].column(n))
        for k in range(min(len(acc), rows)):
            c = acc.entry(k)
            lo[k, n], hi[k, n] = c.lo, c.hi
        if acc.support_end() > rows:
            raise CertificationError("row budget too small for DF columns")
    return IMat(lo, hi)


def conv_matrix_interval(v: CoeffSeq, rows: int, cols: int) -> IMat:
    """Interval matrix of W -> v * W (truncated block)."""
    sup = v.support_end()
    vlo = np.zeros(rows + cols + 1)
    vhi = np.zeros(rows + cols + 1)
    for k in range(min(sup, rows + cols + 1)):
        c = v.entry(k)
        vlo[k], vhi[k] = c.lo, c.hi
    n = np.arange(rows)[:, None]
    q = np.arange(cols)[None, :]
    lo = vlo[np.abs(n - q)].copy()
    hi = vhi[np.abs(n - q)].copy()
    lo[:, 1:] = np.nextafter(lo[:, 1:] + vlo[(n + q)[:, 1:]], -np.inf)
    hi[:, 1:] = np.nextafter(hi[:, 1:] + vhi[(n + q)[:, 1:]], np.inf)
    # exact when one of the addends is zero
    zmask = (vlo[np.abs(n - q)] == 0) & (vhi[np.abs(n - q)] == 0)
    lo[:, 1:][zmask[:, 1:]] = vlo[(n + q)[:, 1:]][zmask[:, 1:]]
    hi[:, 1:][zmask[:, 1:]] = vhi[(n + q)[:, 1:]][zmask[:, 1:]]
    return IMat(lo, hi)


def seq_norm_tail(v: CoeffSeq, start: int) -> Interval:
    """2 sum_{n >= start} |v_n| nu^n (tail of the weighted norm)."""
    nu = Interval.point(v.nu)
    total = ZERO
    pw = nu ** max(start, 1)
    for n in range(max(start, 1), len(v)):
        c = v.entry(n)
        if not (c.lo == 0.0 and c.hi == 0.0):
            total = total + Interval.point(2.0) * abs(c) * pw
        pw = pw * nu
    return total


def _seq_to_col(v: CoeffSeq, rows: int) -> IMat:
    lo = np.zeros((rows, 1))
    hi = np.zeros((rows, 1))
    for k in range(min(len(v), rows)):
        c = v.entry(k)
        lo[k, 0], hi[k, 0] = c.lo, c.hi
    return IMat(lo, hi)


def _col_to_seq(m: IMat, p: ProblemSpec, col=0) -> CoeffSeq:
    return CoeffSeq([m.entry(k, col) for k in range(m.shape[0])],
                    0, p.nu, "none", check=False)


def operator_norm_A(p: ProblemSpec, a0: np.ndarray) -> Interval:
    """||A||_nu for A = A0 + pi^{>N} (the tail contributes exactly 1)."""
    act = active_indices(p.parity, p.N + 1)
    w = xi_weights(p.N + 1, p.nu)
    sub = IMat.exact(a0).submatrix(act, act)
    val = opnorm_upper(sub, w[act], w[act])
    return imax(Interval.point(val), ONE)


# -- the three bounds -----------------------------------------------------------


def bound_Y(ubar: CoeffSeq, a0: np.ndarray, p: ProblemSpec) -> Interval:
    fu = eval_F(ubar, p)
    head = _seq_to_col(fu.project(p.N, "leq"), p.N + 1)
    a_head = IMat.exact(a0) @ head
    y1 = _col_to_seq(a_head, p).norm()
    y2 = fu.project(p.N, "gt").norm()
    return y1 + y2


def bound_Z1(ubar: CoeffSeq, a0: np.ndarray, p: ProblemSpec, mults: dict,
             dfmat: IMat):
    n1 = p.N + 1
    act = active_indices(p.parity, n1)
    w_all = xi_weights(dfmat.shape[0], p.nu)
    w_head = w_all[:n1]

    head = dfmat.submatrix(range(n1), act)
    eye = IMat.exact(np.eye(n1)[:, act])
    z10 = opnorm_upper(eye - (IMat.exact(a0) @ head), w_head, w_head[act])

    tail_rows = range(n1, dfmat.shape[0])
    z11 = opnorm_upper(dfmat.submatrix(tail_rows, act),
                       w_all[n1:], w_head[act])

    z12 = ZERO
    z13 = ZERO
    for i, v in mults.items():
        eta = p.ops[i].tail_col_norm(p.N + 1)
        tail_sum = seq_norm_tail(v, p.N - 2 * p.m + i + 1) * Interval.point(0.5)
        # (the helper counts 2|v| nu^n; the lemma's sum has no xi factor)
        z12 = z12 + Interval.point(2.0) * eta * tail_sum \
            + v.norm() * gamma_bound(2 * p.m - i, p.N + 1, p.nu)
        cm = conv_matrix_interval(v, n1, n1 + v.support_end() + 1)
        av = IMat.exact(a0) @ cm
        cols_q = av.shape[1]
        wq = xi_weights(cols_q, p.nu)
        qact = active_indices(p.ops[i].parity_out, cols_q)
        a0v = opnorm_upper(av.submatrix(range(n1), qact), w_head, wq[qact])
        z13 = z13 + Interval.point(a0v) * eta

    z1 = imax(Interval.point(z10) + Interval.point(z11), z12 + z13)
    parts = {"Z10": Interval.point(z10), "Z11": Interval.point(z11),
             "Z12": z12, "Z13": z13}
    return z1, parts


def bound_Z2(p: ProblemSpec, a_norm: Interval):
    """(Z2, dk_lip): Z2 = ||A|| * dk_lip where dk_lip r bounds the Lipschitz
    variation of DK over the ball of radius r.  Degree-2 nonlinearities give
    an r-independent Z2; degree <= 1 gives zero."""
    deg = p.degree()
    if deg <= 1:
        return ZERO, ZERO
    if deg == 2:
        idx = [i for i, j in enumerate(p.exponents) for _ in range(j)]
        i, l = idx[0], idx[1]
        cap_i = p.ops[i].norm_cap()
        cap_l = p.ops[l].norm_cap()
        dk_lip = Interval.point(2.0) * abs(p.coeff) * cap_i * cap_l
        return a_norm * dk_lip, dk_lip
    raise NotImplementedError(
        f"Z2 realized for total degree <= 2; got degree {deg} "
        "(general polynomial-in-r Z2 not implemented)")


@dataclass
class RadiiFailure(Exception):
    reason: str

    def __str__(self):
        return self.reason


def radii_check(y: Interval, z1: Interval, z2: Interval) -> Interval:
    """Admissible contraction radius, verified in interval arithmetic.

    Picks 1.01x the upper bound of the smaller quadratic root and then
    re-verifies both strict inequalities; raises RadiiFailure otherwise.
    """
    if z1.hi >= 1.0:
        raise RadiiFailure(f"Z1 = {z1.hi} >= 1")
    one_m_z1 = ONE - z1
    disc = one_m_z1 * one_m_z1 - Interval.point(2.0) * z2 * y
    if disc.lo <= 0.0:
        raise RadiiFailure(f"radii discriminant not positive: {disc}")
    if z2.hi == 0.0:
        root = y / one_m_z1
    else:
        root = (one_m_z1 - disc.sqrt()) / z2
    r_star = 1.01 * root.hi
    if r_star <= 0.0:
        r_star = 1e-300
    r = Interval.point(r_star)
    q1 = Interval.point(0.5) * z2 * r * r - one_m_z1 * r + y
    if not q1.hi < 0.0:
        raise RadiiFailure(f"first radii condition failed at r={r_star}: {q1}")
    q2 = z1 + z2 * r
    if not q2.hi < 1.0:
        raise RadiiFailure(f"second radii condition failed at r={r_star}: {q2}")
    return r


# -- certificates ------------------------------------------------------------------


@dataclass
class ExistenceCertificate:
    problem: str
    alpha: Interval
    N: int
    nu: float
    ubar: CoeffSeq
    Y: Interval
    Z1: Interval
    Z2: Interval
    r: Interval
    components: dict
    a_norm: Interval
    dk_lip: Interval
    sup_v_err: Interval        # ||v~ - vbar||_inf bound (= cap_0 * r)
    sup_d2m_err: Interval      # ||d^2m (v~ - vbar)||_inf bound (= r)
    status: str = "certified"
    detail: str = ""

    @property
    def ok(self):
        return self.status == "certified"

    def contraction_gap(self) -> Interval:
        """1 - (Z1 + Z2 r), certified positive on success."""
        return ONE - (self.Z1 + self.Z2 * self.r)

    def to_json(self):
        return {
            "kind": "existence",
            "problem": self.problem,
            "alpha": self.alpha.to_hex(),
            "N": self.N,
            "nu": float.hex(self.nu),
            "ubar": self.ubar.to_json(),
            "Y": self.Y.to_hex(),
            "Z1": self.Z1.to_hex(),
            "Z2": self.Z2.to_hex(),
            "r": self.r.to_hex(),
            "components": {k: v.to_hex() for k, v in self.components.items()},
            "a_norm": self.a_norm.to_hex(),
            "dk_lip": self.dk_lip.to_hex(),
            "sup_v_err": self.sup_v_err.to_hex(),
            "sup_d2m_err": self.sup_d2m_err.to_hex(),
            "status": self.status,
            "detail": self.detail,
        }

    @staticmethod
    def from_json(data) -> "ExistenceCertificate":
        if data.get("kind") != "existence":
            raise ValueError("not an existence certificate")
        return ExistenceCertificate(
            problem=data["problem"],
            alpha=Interval.from_hex(data["alpha"]),
            N=data["N"],
            nu=float.fromhex(data["nu"]),
            ubar=CoeffSeq.from_json(data["ubar"]),
            Y=Interval.from_hex(data["Y"]),
            Z1=Interval.from_hex(data["Z1"]),
            Z2=Interval.from_hex(data["Z2"]),
            r=Interval.from_hex(data["r"]),
            components={k: Interval.from_hex(v)
                        for k, v in data["components"].items()},
            a_norm=Interval.from_hex(data["a_norm"]),
            dk_lip=Interval.from_hex(data["dk_lip"]),
            sup_v_err=Interval.from_hex(data["sup_v_err"]),
            sup_d2m_err=Interval.from_hex(data["sup_d2m_err"]),
            status=data["status"],
            detail=data.get("detail", ""),
        )


def reverify_existence(cert: ExistenceCertificate) -> bool:
    """Standalone re-check of the radii inequalities from stored intervals."""
    if not cert.ok:
        return False
    y, z1, z2, r = cert.Y, cert.Z1, cert.Z2, cert.r
    q1 = Interval.point(0.5) * z2 * r * r - (ONE - z1) * r + y
    q2 = z1 + z2 * r
    return q1.hi < 0.0 and q2.hi < 1.0 and r.lo > 0.0


def prove_existence(p: ProblemSpec, ubar: CoeffSeq, a0: np.ndarray,
                    dfmat: IMat = None, mults: dict = None) -> ExistenceCertificate:
    """Run Y/Z1/Z2 + the radii check; never silently downgrades rigor."""
    if mults is None:
        mults = multipliers(ubar, p)
    if dfmat is None:
        rows = _df_row_budget(p, mults)
        dfmat = df_columns(p, mults, rows)
    a_norm = operator_norm_A(p, a0)
    y = bound_Y(ubar, a0, p)
    z1, parts = bound_Z1(ubar, a0, p, mults, dfmat)
    z2, dk_lip = bound_Z2(p, a_norm)
    cap0 = p.ops[0].norm_cap()
    try:
        r = radii_check(y, z1, z2)
        status, detail = "certified", ""
    except RadiiFailure as exc:
        r = Interval.point(0.0)
        status, detail = "failed", str(exc)
    cert = ExistenceCertificate(
        problem=p.name, alpha=p.alpha, N=p.N, nu=p.nu, ubar=ubar,
        Y=y, Z1=z1, Z2=z2, r=r, components=parts, a_norm=a_norm,
        dk_lip=dk_lip, sup_v_err=cap0 * r, sup_d2m_err=r,
        status=status, detail=detail)
    if cert.ok:
        # soundness self-check: the serialized record must re-verify alone
        if not reverify_existence(ExistenceCertificate.from_json(cert.to_json())):
            raise CertificationError("serialized certificate failed re-verification")
    return cert


def _df_row_budget(p: ProblemSpec, mults: dict) -> int:
    rows = p.N + 1 + 2 * p.m
    for i, v in mults.items():
        rows = max(rows, p.N + 1 + p.ops[i].range_pad + v.support_end() + 2)
    return rows


# -- float-side builders -----------------------------------------------------------


def float_kmat(p: ProblemSpec, i: int) -> np.ndarray:
    op = p.ops[i]
    rows = p.N + 1 + op.range_pad
    out = np.zeros((rows, p.N + 1))
    for n in active_indices(p.parity, p.N + 1):
        col = op.column(n)
        if col.support_end() > rows:
            raise CertificationError("column support exceeds row budget")
        m = col.mids()[:rows]
        out[: len(m), n] = m
    return out


def float_problem(p: ProblemSpec) -> TruncatedResidual:
    kmats = {i: float_kmat(p, i) for i in p.needed_indices()}
    psi = p.psi.mids()
    mask = np.zeros(p.N + 1, dtype=bool)
    mask[active_indices(p.parity, p.N + 1)] = True
    return TruncatedResidual(p.N, kmats, p.coeff.mid(), p.exponents,
                             [(c.mid(), i) for c, i in p.linear_terms],
                             psi, mask)


def ubar_from_floats(p: ProblemSpec, u: np.ndarray) -> CoeffSeq:
    vec = np.asarray(u, dtype=float).copy()
    mask = np.zeros(len(vec), dtype=bool)
    mask[active_indices(p.parity, len(vec))] = True
    vec[~mask] = 0.0
    return CoeffSeq.from_floats(vec, 0, p.nu, p.parity)


def save_certificate(cert, path):
    with open(path, "w") as fh:
        json.dump(cert.to_json(), fh, indent=1)


def load_certificate(path):
    with open(path) as fh:
        data = json.load(fh)
    if data.get("kind") == "existence":
        return ExistenceCertificate.from_json(data)
    from .stability import StabilityCertificate
    if data.get("kind") == "stability":
        return StabilityCertificate.from_json(data)
    raise ValueError(f"unknown certificate kind {data.get('kind')!r}")
