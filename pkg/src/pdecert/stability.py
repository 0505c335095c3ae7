"""Rigorous unstable-eigenvalue counts for certified steady states.

Two pipelines, both consuming an existence certificate (which must have been
produced at nu = 1):

* Gershgorin: pseudo-diagonalize the compact operator DF(U~)^-1 Linv with a
  numerically computed eigenbasis P, enclose its weighted column Gershgorin
  disks (finite columns by a residual argument, tail columns by the eta/gamma
  decay), and classify each disk against the stable half-plane and the
  exclusion ball of radius 1/lambda_max coming from an a priori bound on
  unstable eigenvalues.

* Generalized: work directly on the pencil DF(U~) U = lambda Linv U.  Any
  eigenvalue with |lambda| <= lambda_max lies within relative distance delta
  of one of the reciprocals of the diagonal of M0 = P0^-1 A0 Linv P0, where
  delta aggregates the finite defect, the Lipschitz terms and the quadratic
  lambda_max tail corrections (the beta coefficients).

Counting uses the homotopy form of the Gershgorin theorem: an isolated group
of k disks contains exactly k eigenvalues with multiplicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .interval import Interval, ZERO, ONE, imax, isum
from .ivarray import CMat, IMat, enclose_inverse, opnorm_upper, xi_weights
from .linsolve import gamma_bound
from .seqspace import CoeffSeq, active_indices, unit_e, xi
from .validate import (ExistenceCertificate, ProblemSpec, conv_matrix_interval,
                       df_columns, multipliers, _df_row_budget)


class StabilityError(RuntimeError):
    pass


# -- certificate -----------------------------------------------------------------


@dataclass
class Disk:
    n: int
    center_re: Interval
    center_im: Interval
    radius: Interval
    kind: str

    def to_json(self):
        return {"n": self.n, "center_re": self.center_re.to_hex(),
                "center_im": self.center_im.to_hex(),
                "radius": self.radius.to_hex(), "kind": self.kind}

    @staticmethod
    def from_json(d):
        return Disk(d["n"], Interval.from_hex(d["center_re"]),
                    Interval.from_hex(d["center_im"]),
                    Interval.from_hex(d["radius"]), d["kind"])


@dataclass
class StabilityCertificate:
    problem: str
    method: str
    lambda_max: Interval
    mu_apriori: float
    eigs_real: bool
    disks: list
    tail_radius: Interval
    n_unstable: int
    unstable: list              # disks in the lambda plane
    stable_re_bound: Interval   # certified upper bound for stable Re(lambda)
    status: str = "certified"
    detail: str = ""
    delta: Interval = field(default_factory=lambda: ZERO)
    parts: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == "certified"

    def to_json(self):
        return {
            "kind": "stability",
            "problem": self.problem,
            "method": self.method,
            "lambda_max": self.lambda_max.to_hex(),
            "mu_apriori": float.hex(float(self.mu_apriori)),
            "eigs_real": self.eigs_real,
            "disks": [d.to_json() for d in self.disks],
            "tail_radius": self.tail_radius.to_hex(),
            "n_unstable": self.n_unstable,
            "unstable": [d.to_json() for d in self.unstable],
            "stable_re_bound": self.stable_re_bound.to_hex(),
            "status": self.status,
            "detail": self.detail,
            "delta": self.delta.to_hex(),
            "parts": {k: v.to_hex() for k, v in self.parts.items()},
        }

    @staticmethod
    def from_json(data):
        if data.get("kind") != "stability":
            raise ValueError("not a stability certificate")
        return StabilityCertificate(
            problem=data["problem"], method=data["method"],
            lambda_max=Interval.from_hex(data["lambda_max"]),
            mu_apriori=float.fromhex(data["mu_apriori"]),
            eigs_real=data["eigs_real"],
            disks=[Disk.from_json(d) for d in data["disks"]],
            tail_radius=Interval.from_hex(data["tail_radius"]),
            n_unstable=data["n_unstable"],
            unstable=[Disk.from_json(d) for d in data["unstable"]],
            stable_re_bound=Interval.from_hex(data["stable_re_bound"]),
            status=data["status"], detail=data.get("detail", ""),
            delta=Interval.from_hex(data["delta"]) if "delta" in data else ZERO,
            parts={k: Interval.from_hex(v)
                   for k, v in data.get("parts", {}).items()})


# -- shared context ----------------------------------------------------------------


class StabilityContext:
    """Bundles the rigorous pieces reused by both stability pipelines."""

    def __init__(self, p: ProblemSpec, cert: ExistenceCertificate,
                 a0: np.ndarray):
        if p.nu != 1.0:
            raise StabilityError("stability requires the existence run at nu = 1")
        if not cert.ok:
            raise StabilityError("existence certificate is not certified")
        self.p = p
        self.cert = cert
        self.a0 = np.asarray(a0, dtype=float)
        self.act = active_indices(p.parity, p.N + 1)
        self.mults = multipliers(cert.ubar, p)
        rows = _df_row_budget(p, self.mults)
        self.dfmat = df_columns(p, self.mults, rows)
        self.z2r = cert.Z2 * cert.r
        gap = ONE - (cert.Z1 + self.z2r)
        if not gap.lo > 0.0:
            raise StabilityError("contraction gap 1-(Z1+Z2 r) not positive")
        self.gap = gap
        n1 = p.N + 1
        self.linv_mat = self._op_matrix(0, n1 + 2 * p.m)
        self._av_norm_cache = {}
        self._avk_head_cache = {}
        self.w_full = xi_weights(rows, 1.0)

    # -- matrices ------------------------------------------------------------

    def _op_matrix(self, i, rows):
        lo = np.zeros((rows, self.p.N + 1))
        hi = np.zeros((rows, self.p.N + 1))
        for n in self.act:
            col = self.p.ops[i].column(n)
            if col.support_end() > rows:
                raise StabilityError("operator column exceeds row budget")
            for k in range(min(len(col), rows)):
                c = col.entry(k)
                lo[k, n], hi[k, n] = c.lo, c.hi
        return IMat(lo, hi)

    def eta0(self, k) -> Interval:
        return self.p.ops[0].tail_col_norm(k)

    # -- norms reused by the tail estimates ----------------------------------

    def av_norm(self, i) -> Interval:
        """||A V_i||_1 for the multiplication operator by V_i."""
        if i in self._av_norm_cache:
            return self._av_norm_cache[i]
        p, v = self.p, self.mults[i]
        n1 = p.N + 1
        qmax = n1 + v.support_end() + 1
        rows = qmax + v.support_end() + 1
        cm = conv_matrix_interval(v, rows, qmax)
        head = IMat.exact(self.a0) @ cm.submatrix(range(n1), range(qmax))
        wq = xi_weights(qmax, 1.0)
        wr = xi_weights(rows, 1.0)
        qact = active_indices(p.ops[i].parity_out, qmax)
        col_head = head.col_sums_upper(wq[:n1])
        col_tail = cm.submatrix(range(n1, rows), range(qmax)) \
            .col_sums_upper(wr[n1:])
        sums = np.nextafter(col_head + col_tail, np.inf)
        vals = [Interval.point(float(sums[q] / wq[q])) for q in qact]
        vals.append(v.norm())
        out = imax(*vals)
        self._av_norm_cache[i] = out
        return out

    def avk_head_norm(self, i) -> Interval:
        """||A V_i K_i pi^{<=2m-1}||_1."""
        if i in self._avk_head_cache:
            return self._avk_head_cache[i]
        p, v = self.p, self.mults[i]
        vals = [ZERO]
        for c in active_indices(p.parity, 2 * p.m):
            col = v.conv(p.ops[i].column(c))
            head = col.project(p.N, "leq")
            hm = np.zeros((p.N + 1, 1))
            hM = np.zeros((p.N + 1, 1))
            for k in range(min(len(head), p.N + 1)):
                e = head.entry(k)
                hm[k, 0], hM[k, 0] = e.lo, e.hi
            ah = IMat.exact(self.a0) @ IMat(hm, hM)
            nrm = CoeffSeq([ah.entry(k, 0) for k in range(p.N + 1)],
                           0, 1.0, "none", check=False).norm()
            nrm = nrm + col.project(p.N, "gt").norm()
            vals.append(nrm / Interval.point(xi(c)))
        out = imax(*vals)
        self._avk_head_cache[i] = out
        return out


# -- a priori bounds on unstable eigenvalues ------------------------------------------


def _crude_sup(w: CoeffSeq) -> Interval:
    """|W_0| + 2 sum |W_n| G_n^(k)(1): a sup bound valid in any Gegenbauer
    family (the polynomials peak at the endpoints)."""
    from .interval import gamma_ratio
    total = abs(w.entry(0))
    for n in range(1, w.support_end()):
        c = w.entry(n)
        if c.lo == 0.0 and c.hi == 0.0:
            continue
        peak = ONE if w.basis == 0 else gamma_ratio(w.basis, n)
        total = total + Interval.point(2.0) * abs(c) * peak
    return total


def sup_function_bound(u: CoeffSeq, grid: int = 200) -> Interval:
    """Rigorous bound on max |G0(u)| over [-1,1]: grid values plus a mean
    value correction from a sup bound on the derivative."""
    from .operators import apply_dk
    du_sup = _crude_sup(apply_dk(u, 1))
    h = 2.0 / grid
    best = ZERO
    for t in range(grid + 1):
        x = -1.0 + t * h
        x = min(max(x, -1.0), 1.0)
        best = imax(best, abs(u.evaluate(Interval.point(x))))
    return best + Interval.point(h) * du_sup / Interval.point(2.0)


def apriori_lambda_max(p: ProblemSpec, cert: ExistenceCertificate, mu=None):
    """(lambda_max, eigs_real, mu): modulus bound for eigenvalues with
    Re >= -mu; for the self-adjoint problem all eigenvalues are real and
    bounded above directly."""
    if p.name == "toy":
        lam = cert.ubar.norm() + cert.r
        return lam, True, 0.0
    if p.name == "ks":
        if mu is None:
            mu = 463.1 if abs(p.alpha.mid() - 1.0) < 1e-9 else 377.0
        alpha = abs(p.alpha)
        v_seq = p.ops[0].apply(cert.ubar)
        dv_seq = p.ops[1].apply(cert.ubar)
        v_sup = imax(sup_function_bound(v_seq), ZERO) \
            + p.ops[0].norm_cap() * cert.r
        dv_sup = imax(sup_function_bound(dv_seq), ZERO) \
            + p.ops[1].norm_cap() * cert.r
        pi_iv = Interval(math.nextafter(math.pi, 0.0), math.nextafter(math.pi, 4.0))
        # real part at the optimal kappa: alpha |dv| + alpha^2 (1/2 + |v|/pi)^2
        re_term = Interval.point(0.5) + v_sup / pi_iv
        re_max = alpha * dv_sup + alpha * alpha * re_term * re_term
        # imaginary part at its optimal kappa
        d_fac = alpha * (ONE + Interval.point(2.0) * v_sup / pi_iv)
        a_fac = Interval.point(mu) + alpha * dv_sup
        kappa = ONE / (d_fac + (d_fac * d_fac
                                + Interval.point(4.0) * a_fac).sqrt())
        denom = ONE - d_fac * kappa
        if not denom.lo > 0.0:
            raise StabilityError("kappa constraint infeasible")
        inner = (a_fac + d_fac / (Interval.point(4.0) * kappa)) / denom
        im_max = d_fac * inner.sqrt()
        re_pos = imax(re_max, ZERO)
        lam = (re_pos * re_pos + im_max * im_max).sqrt()
        return lam, False, float(mu)
    raise StabilityError(f"no a priori eigenvalue bound registered for {p.name!r}")


# -- Gershgorin pipeline ------------------------------------------------------------


def build_mbar(ctx: StabilityContext, p0: np.ndarray, q0: np.ndarray) -> IMat:
    """Interval enclosure of Q A0 (pi Linv pi) P0 on the reduced index set."""
    n1 = ctx.p.N + 1
    lsub = ctx.linv_mat.submatrix(range(n1), ctx.act)
    prod = (IMat.exact(ctx.a0) @ lsub).submatrix(ctx.act, range(len(ctx.act)))
    return IMat.exact(q0) @ (prod @ IMat.exact(p0))


def gershgorin_finite_disks(ctx: StabilityContext, p0, q0, pinv_norm: Interval):
    """Disk enclosures for the first (reduced) columns of the similarity
    transform of DF(U~)^-1 Linv."""
    p, n1 = ctx.p, ctx.p.N + 1
    act = ctx.act
    na = len(act)
    mbar = build_mbar(ctx, p0, q0)
    w_red = np.array([xi(s) for s in act], dtype=float)

    # r_bar: weighted off-diagonal column sums
    absm = mbar.abs_upper()
    weighted = np.nextafter(absm * w_red[:, None], np.inf)
    colsums = np.zeros(na)
    for k in range(na):
        colsums = np.nextafter(colsums + weighted[k], np.inf)
    diag_w = np.array([np.nextafter(absm[t, t] * w_red[t], np.inf)
                       for t in range(na)])
    rbar = np.nextafter((colsums - diag_w) / w_red, np.inf)
    rbar = np.maximum(rbar, 0.0)

    # residuals of the raw columns: DF(Ubar) (P0 Mbar_col) - Linv P0 e_n;
    # the Gershgorin error for the E-basis column carries one 1/xi_n factor
    p_full = np.zeros((n1, na))
    p_full[act, :] = p0
    pm = IMat.exact(p_full) @ mbar                       # (n1, na)
    g = ctx.dfmat @ pm                                   # (rows, na)
    lp = ctx.linv_mat @ IMat.exact(p_full)               # (n1+2m, na)
    rows = g.shape[0]
    lp_big_lo = np.zeros((rows, na))
    lp_big_hi = np.zeros((rows, na))
    lp_big_lo[: lp.shape[0]] = lp.lo
    lp_big_hi[: lp.shape[0]] = lp.hi
    resid = g - IMat(lp_big_lo, lp_big_hi)
    a_head = IMat.exact(ctx.a0) @ resid.submatrix(range(n1), range(na))
    num = np.nextafter(
        a_head.col_sums_upper(ctx.w_full[:n1])
        + resid.submatrix(range(n1, rows), range(na))
        .col_sums_upper(ctx.w_full[n1:rows]), np.inf)
    pm_norms = pm.col_sums_upper(ctx.w_full[:n1])

    disks = []
    for t, n in enumerate(act):
        eps = (pinv_norm
               * (Interval.point(float(num[t]))
                  + ctx.z2r * Interval.point(float(pm_norms[t])))
               / ctx.gap) / Interval.point(xi(n))
        disks.append(Disk(n, mbar.entry(t, t), ZERO,
                          Interval.point(float(rbar[t])) + eps,
                          "gershgorin_finite"))
    return disks, mbar


def gershgorin_tail_radius(ctx: StabilityContext, pinv_norm: Interval,
                           n: int) -> Interval:
    """Radius of the origin-centered enclosure of tail disks (columns > N)."""
    p = ctx.p
    if n <= p.N:
        raise StabilityError("tail disks exist only for n > N")
    eta0_n = ctx.eta0(n)
    rbar_inf = Interval.point(0.5) * pinv_norm * eta0_n
    inner = ctx.z2r * eta0_n
    for i in ctx.mults:
        inner = inner + ctx.av_norm(i) \
            * p.ops[i].tail_col_norm(n - 2 * p.m - 1) \
            * gamma_bound(2 * p.m, n, 1.0)
        inner = inner + ctx.avk_head_norm(i) * eta0_n
    eps_inf = Interval.point(0.5) * pinv_norm * inner / ctx.gap
    return rbar_inf + eps_inf


def _disk_groups(disks):
    """Connected components under pairwise overlap (real centers)."""
    n = len(disks)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            di, dj = disks[i], disks[j]
            dist = abs(di.center_re - dj.center_re)
            if dist.lo <= (di.radius + dj.radius).hi:
                ri, rj = find(i), find(j)
                parent[ri] = rj
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _invert_disk(d: Disk) -> Disk:
    """{1/z : z in disk}; requires 0 outside the disk."""
    c2 = d.center_re * d.center_re + d.center_im * d.center_im
    denom = c2 - d.radius * d.radius
    if not denom.lo > 0.0:
        raise StabilityError("cannot invert a disk containing zero")
    return Disk(d.n, d.center_re / denom, -d.center_im / denom,
                d.radius / denom, "inverted")


def count_unstable_gershgorin(problem_name, disks, tail_radius, lambda_max,
                              eigs_real, mu_apriori) -> StabilityCertificate:
    """Classify mu-plane disks and count unstable eigenvalues.

    Disks inside the exclusion ball of radius 1/lambda_max cannot hold
    unstable eigenvalues (a priori bound); origin-centered tail disks must fit
    in that ball.  Unstable groups must be isolated from everything else.
    """
    inv_lam = ONE / lambda_max
    if not (tail_radius.hi < inv_lam.lo):
        return StabilityCertificate(
            problem_name, "gershgorin", lambda_max, mu_apriori, eigs_real,
            disks, tail_radius, -1, [], ZERO, "inconclusive",
            f"tail radius {tail_radius.hi} not below 1/lambda_max {inv_lam.lo}")

    unstable_idx = []
    stable_s = tail_radius  # sup |z| over stable-classified disks
    for t, d in enumerate(disks):
        lo_re = d.center_re.lo - d.radius.hi
        hi_re = d.center_re.hi + d.radius.hi
        mag = (abs(d.center_re) + d.radius) if eigs_real else \
            ((d.center_re * d.center_re + d.center_im * d.center_im).sqrt()
             + d.radius)
        if lo_re > 0.0:
            unstable_idx.append(t)
        elif hi_re < 0.0 or mag.hi < inv_lam.lo:
            stable_s = imax(stable_s, mag)
        else:
            return StabilityCertificate(
                problem_name, "gershgorin", lambda_max, mu_apriori, eigs_real,
                disks, tail_radius, -1, [], ZERO, "inconclusive",
                f"disk {d.n} straddles the classification regions")

    # unstable disks must be isolated from all other disks and from the tail
    groups = _disk_groups(disks)
    for g in groups:
        in_u = [t in unstable_idx for t in g]
        if any(in_u) and not all(in_u):
            return StabilityCertificate(
                problem_name, "gershgorin", lambda_max, mu_apriori, eigs_real,
                disks, tail_radius, -1, [], ZERO, "inconclusive",
                "unstable disk group touches a stable group")
    for t in unstable_idx:
        d = disks[t]
        low_mag = (abs(d.center_re) - d.radius)
        if not (low_mag.lo > tail_radius.hi):
            return StabilityCertificate(
                problem_name, "gershgorin", lambda_max, mu_apriori, eigs_real,
                disks, tail_radius, -1, [], ZERO, "inconclusive",
                f"unstable disk {d.n} not separated from tail disks")

    unstable = [_invert_disk(disks[t]) for t in unstable_idx]
    # certified bound on the real part of the remaining spectrum
    if eigs_real:
        edges = [disks[t].radius.hi - disks[t].center_re.lo
                 for t in range(len(disks)) if t not in unstable_idx]
        s = max(edges + [tail_radius.hi])
        stable_re = -(ONE / Interval.point(s))
    else:
        # stable disks sit inside B_{1/lambda_max}; eigenvalues there have
        # |lambda| >= 1/s > lambda_max, hence Re(lambda) < -mu_apriori
        if stable_s.hi * lambda_max.hi < 1.0:
            stable_re = Interval.point(-mu_apriori)
        else:
            stable_re = Interval.point(0.0)
    return StabilityCertificate(
        problem_name, "gershgorin", lambda_max, mu_apriori, eigs_real,
        disks, tail_radius, len(unstable_idx), unstable, stable_re)


def prove_stability_gershgorin(ctx: StabilityContext, p0, q0,
                               mu=None) -> StabilityCertificate:
    lam, eigs_real, mu_used = apriori_lambda_max(ctx.p, ctx.cert, mu)
    w_red = np.array([xi(s) for s in ctx.act], dtype=float)
    _, pinv_up = enclose_inverse(p0, w_red)
    pinv_norm = imax(Interval.point(pinv_up), ONE)
    disks, _ = gershgorin_finite_disks(ctx, p0, q0, pinv_norm)
    # radii are nonincreasing in the column index, so the first tail column
    # bounds all of them
    tail = gershgorin_tail_radius(ctx, pinv_norm, ctx.p.N + 1)
    return count_unstable_gershgorin(ctx.p.name, disks, tail, lam,
                                     eigs_real, mu_used)


# -- generalized-eigenproblem pipeline ---------------------------------------------


def _cmat_from_imat(m: IMat) -> CMat:
    return CMat(m, IMat.zeros(m.shape))


def generalized_disks(ctx: StabilityContext, p0: np.ndarray, lambda_max,
                      refine: int = 1):
    """Disks B_j around lambda_j = 1/mu_j containing all pencil eigenvalues
    with |lambda| <= lambda_max; returns (delta, mus interval pairs, data).

    ``refine`` > 0 re-evaluates delta with the improved lambda_max taken from
    the union of the produced disks (valid whenever all disks land inside the
    current ball).
    """
    p = ctx.p
    n1 = p.N + 1
    act = ctx.act
    na = len(act)
    w_red = np.array([xi(s) for s in act], dtype=float)
    complex_case = np.iscomplexobj(p0)

    penc, pinv_up = enclose_inverse(p0, w_red)
    p0_norm = Interval.point(opnorm_upper(
        CMat.exact(p0) if complex_case else IMat.exact(p0), w_red, w_red))
    pinv_norm = Interval.point(pinv_up)

    a0_red = ctx.a0[np.ix_(act, act)]
    l_red = ctx.linv_mat.submatrix(act, act)  # head block of Linv (reduced)

    def wrap(m):
        if complex_case:
            return m if isinstance(m, CMat) else (
                CMat.exact(m) if np.iscomplexobj(np.asarray(m)) else
                _cmat_from_imat(m if isinstance(m, IMat) else IMat.exact(m)))
        return m if isinstance(m, IMat) else IMat.exact(m)

    al = wrap(IMat.exact(a0_red) @ l_red)
    m0 = wrap(penc) @ (al @ wrap(p0))
    mus = [m0.entry(t, t) for t in range(na)]
    if not complex_case:
        mus = [(mu, ZERO) for mu in mus]

    # ||R0||: off-diagonal part of M0
    absm = m0.abs_upper()
    weighted = np.nextafter(absm * w_red[:, None], np.inf)
    colsums = np.zeros(na)
    for k in range(na):
        colsums = np.nextafter(colsums + weighted[k], np.inf)
    offdiag = np.nextafter(
        (colsums - np.array([absm[t, t] * w_red[t] for t in range(na)]))
        / w_red, np.inf)
    r0_norm = Interval.point(float(np.max(np.maximum(offdiag, 0.0))))

    # Z1_P0 = ||P0^-1 (I - A0 DF(Ubar)) P0||  (reduced block)
    df_red = ctx.dfmat.submatrix(act, act)
    i_red = IMat.eye(na)
    inner = i_red - (IMat.exact(a0_red) @ df_red)
    z1_p0 = Interval.point(opnorm_upper(wrap(penc) @ (wrap(inner) @ wrap(p0)),
                                        w_red, w_red))
    z2_len_r = ctx.z2r                      # ||A0 pi (dDF) pi|| <= ||A (dDF)||
    z2_gtn_r = ctx.cert.dk_lip * ctx.cert.r

    # DK(Ubar) strips
    rows = ctx.dfmat.shape[0]
    dk_mat = ctx.dfmat - IMat.exact(np.eye(rows)[:, : n1])
    dk_tail = dk_mat.submatrix(range(n1, rows), act)       # pi^{>N} DK pi^{<=N}
    l_tail = ctx.linv_mat.submatrix(range(n1, n1 + 2 * p.m), act)

    w_tail = ctx.w_full[n1:rows]
    dk_tail_p0 = wrap(dk_tail) @ wrap(p0)
    beta_dk = Interval.point(opnorm_upper(dk_tail_p0, w_tail, w_red))
    l_tail_p0 = wrap(l_tail) @ wrap(p0)
    beta_12 = Interval.point(opnorm_upper(
        l_tail_p0, ctx.w_full[n1: n1 + 2 * p.m], w_red))

    # columns q > N of A0 DK(Ubar) and A0 Linv restricted to useful strips
    def a0_cols(op_cols, qs):
        lo = np.zeros((n1, len(qs)))
        hi = np.zeros((n1, len(qs)))
        for t, q in enumerate(qs):
            col = op_cols(q)
            for k in range(min(len(col), n1)):
                c = col.entry(k)
                lo[k, t], hi[k, t] = c.lo, c.hi
        return IMat.exact(ctx.a0) @ IMat(lo, hi)

    def dk_col(q):
        acc = None
        for i, v in ctx.mults.items():
            term = v.conv(p.ops[i].column(q))
            acc = term if acc is None else acc + term
        return acc.project(p.N, "leq")

    def linv_col(q):
        return p.ops[0].column(q).project(p.N, "leq")

    from .seqspace import parity_allows
    # DK(Ubar) and Linv both preserve the problem's parity subspace
    qs_dk = [q for q in range(n1, rows) if parity_allows(p.parity, q)]
    qs_l = [q for q in range(n1, n1 + 2 * p.m) if parity_allows(p.parity, q)]

    pinv_a0 = wrap(penc) @ wrap(IMat.exact(a0_red))
    # embed reduced pinv_a0 action on head columns: build (na x #q) products
    e_dk = wrap(a0_cols(dk_col, qs_dk).submatrix(act, range(len(qs_dk))))
    e_l = wrap(a0_cols(linv_col, qs_l).submatrix(act, range(len(qs_l))))

    dk_strip = dk_mat.submatrix([q for q in qs_dk], act)
    l_strip = ctx.linv_mat.submatrix([q for q in qs_l], act)
    w_qdk = np.array([ctx.w_full[q] for q in qs_dk])
    w_ql = np.array([ctx.w_full[q] for q in qs_l])

    beta_02_main = Interval.point(opnorm_upper(
        (pinv_a0 @ e_dk) @ (wrap(dk_strip) @ wrap(p0)), w_red, w_red)) \
        if qs_dk else ZERO
    beta_13_main = Interval.point(opnorm_upper(
        (pinv_a0 @ e_dk) @ (wrap(l_strip_pad(dk_strip, l_strip, qs_dk, qs_l))
                            @ wrap(p0)), w_red, w_red)) if qs_dk else ZERO
    beta_21_main = Interval.point(opnorm_upper(
        (pinv_a0 @ e_l) @ (wrap(l_strip) @ wrap(p0)), w_red, w_red))

    pinv_a0_norm = Interval.point(opnorm_upper(pinv_a0, w_red, w_red))
    z13 = ctx.cert.components["Z13"]
    pa_dk_tail = pinv_norm * z13          # ||P0^-1 A0 DK pi^{>N}|| bound
    # Z2_P0: two valid conjugation bounds; keep the smaller
    z2_p0_a = p0_norm * pinv_norm * ctx.z2r
    z2_p0_b = pinv_a0_norm * p0_norm * (ctx.cert.dk_lip * ctx.cert.r)
    z2_p0_r = z2_p0_a if z2_p0_a.hi <= z2_p0_b.hi else z2_p0_b

    eta_np1 = ctx.eta0(p.N + 1)

    def assemble_delta(lam_max: Interval):
        eps = ZERO
        for i, v in ctx.mults.items():
            tail_sum = _tail_abs_sum(v, p.N - 2 * p.m + i + 1)
            eps = eps + Interval.point(2.0) * p.ops[i].tail_col_norm(p.N + 1) \
                * tail_sum + v.norm() * gamma_bound(2 * p.m - i, p.N + 1, 1.0)
        eps = eps + z2_gtn_r + lam_max * gamma_bound(2 * p.m, p.N + 1, 1.0)
        if not eps.hi < 1.0:
            raise StabilityError(
                f"tail not contractive (eps = {eps.hi} >= 1); increase N")
        geo = eps / (ONE - eps)
        beta_01 = beta_dk + p0_norm * z2_gtn_r
        beta_02 = beta_02_main + pa_dk_tail * p0_norm * z2_gtn_r
        beta_11 = eta_np1 * pinv_a0_norm * (beta_dk + p0_norm * z2_gtn_r)
        beta_13 = beta_13_main
        beta_14 = pa_dk_tail + pinv_norm * z2_len_r
        beta_21 = beta_21_main
        beta_22 = eta_np1 * pinv_a0_norm
        beta2 = beta_21 + geo * beta_12 * beta_22
        beta1 = beta_11 + beta_13 + pinv_norm * z2_len_r * beta_12 \
            + geo * (beta_12 * beta_14 + beta_01 * beta_22)
        beta0 = beta_02 + pinv_norm * z2_len_r * beta_01 \
            + geo * beta_01 * beta_14
        delta = lam_max * r0_norm + beta2 * lam_max * lam_max \
            + beta1 * lam_max + beta0 + z1_p0 + z2_p0_r
        parts = {"eps": eps, "r0_norm": r0_norm, "beta0": beta0,
                 "beta1": beta1, "beta2": beta2, "Z1_P0": z1_p0,
                 "Z2_P0_r": z2_p0_r, "lam_R0": lam_max * r0_norm,
                 "beta1_lam": beta1 * lam_max,
                 "beta2_lam2": beta2 * lam_max * lam_max}
        return delta, parts

    lam = lambda_max
    delta, parts = assemble_delta(lam)
    for _ in range(max(0, refine)):
        if not delta.hi < 1.0:
            break
        # lambda_max refinement: only eigenvalues with Re >= 0 need the a
        # priori bound, and each of them lies in a disk that meets the closed
        # right half-plane and the current ball; take the sup of |z| there
        sup_abs = ZERO
        ok = True
        floor = (ONE - delta) / lam
        for mu_re, mu_im in mus:
            mu_abs2 = mu_re * mu_re + mu_im * mu_im
            if not mu_abs2.lo > 0.0:
                # the disk misses the ball when |mu| < (1-delta)/lambda_max
                if mu_abs2.sqrt().hi < floor.lo:
                    continue
                ok = False
                break
            lam_j_abs = ONE / mu_abs2.sqrt()
            if (lam_j_abs * (ONE - delta)).lo > lam.hi:
                continue  # entire disk outside the ball
            lam_re = mu_re / mu_abs2
            rad = delta * lam_j_abs
            if (lam_re + rad).hi < 0.0:
                continue  # disk entirely in the open stable half-plane
            if (lam_j_abs * (ONE + delta)).hi < lam.lo:
                sup_abs = imax(sup_abs, lam_j_abs * (ONE + delta))
            else:
                ok = False
                break
        if not ok or sup_abs.hi <= 0.0:
            break
        # keep a strict margin so the surviving disks end up in the interior
        lam_new = Interval.point(1.001 * sup_abs.hi)
        if not lam_new.hi < lam.lo:
            break
        delta_new, parts_new = assemble_delta(lam_new)
        if delta_new.hi >= delta.hi:
            break
        lam, delta, parts = lam_new, delta_new, parts_new
    return delta, mus, lam, parts


def l_strip_pad(dk_strip: IMat, l_strip: IMat, qs_dk, qs_l) -> IMat:
    """pi^{>N} Linv pi^{<=N} rows aligned with the DK strip rows."""
    lo = np.zeros_like(dk_strip.lo)
    hi = np.zeros_like(dk_strip.hi)
    pos = {q: t for t, q in enumerate(qs_dk)}
    for t, q in enumerate(qs_l):
        if q in pos:
            lo[pos[q]] = l_strip.lo[t]
            hi[pos[q]] = l_strip.hi[t]
    return IMat(lo, hi)


def _tail_abs_sum(v: CoeffSeq, start: int) -> Interval:
    total = ZERO
    for n in range(max(start, 0), len(v)):
        c = v.entry(n)
        if not (c.lo == 0.0 and c.hi == 0.0):
            total = total + abs(c)
    return total


def count_unstable_generalized(problem_name, mus, delta, lambda_max,
                               mu_apriori) -> StabilityCertificate:
    """Classify the disks B_j = B(1/mu_j, delta |1/mu_j|)."""
    if not delta.hi < 1.0:
        return StabilityCertificate(
            problem_name, "generalized", lambda_max, mu_apriori, False, [],
            ZERO, -1, [], ZERO, "inconclusive",
            f"delta = {delta.hi} >= 1")
    disks = []
    unstable_idx = []
    stable_ok = True
    any_outside = False
    detail = ""
    floor = (ONE - delta) / lambda_max
    for t, (mu_re, mu_im) in enumerate(mus):
        mu_abs2 = mu_re * mu_re + mu_im * mu_im
        if not mu_abs2.lo > 0.0:
            if mu_abs2.sqrt().hi < floor.lo:
                any_outside = True
                continue        # the disk misses the lambda_max ball entirely
            stable_ok = False
            detail = f"mu_{t} enclosure contains zero but is not negligible"
            break
        lam_re = mu_re / mu_abs2
        lam_im = -mu_im / mu_abs2
        lam_abs = ONE / mu_abs2.sqrt()
        rad = delta * lam_abs
        if (lam_abs * (ONE - delta)).lo > lambda_max.hi:
            any_outside = True
            continue            # outside the ball: no |lambda|<=lambda_max here
        d = Disk(t, lam_re, lam_im, rad, "generalized")
        disks.append(d)
        lo_re = lam_re.lo - rad.hi
        hi_re = lam_re.hi + rad.hi
        mag_hi = (lam_abs * (ONE + delta)).hi
        if lo_re > 0.0 and mag_hi < lambda_max.lo:
            unstable_idx.append(len(disks) - 1)
        elif hi_re < 0.0:
            pass
        elif lo_re > 0.0:
            stable_ok = False
            detail = f"unstable candidate disk {t} not inside the lambda ball"
            break
        else:
            stable_ok = False
            detail = f"disk {t} straddles the imaginary axis"
            break
    if not stable_ok:
        return StabilityCertificate(
            problem_name, "generalized", lambda_max, mu_apriori, False,
            disks, ZERO, -1, [], ZERO, "inconclusive", detail)
    # isolation of each unstable disk from every other disk (complex metric)
    for t in unstable_idx:
        du = disks[t]
        for s, d in enumerate(disks):
            if s == t:
                continue
            dre = du.center_re - d.center_re
            dim = du.center_im - d.center_im
            dist2 = dre * dre + dim * dim
            rsum = du.radius + d.radius
            if not dist2.lo > (rsum * rsum).hi:
                return StabilityCertificate(
                    problem_name, "generalized", lambda_max, mu_apriori, False,
                    disks, ZERO, -1, [], ZERO, "inconclusive",
                    f"unstable disk {t} overlaps disk {s}")
    # in-ball stable disks bound their eigenvalues by center+radius; any
    # eigenvalue outside the ball has Re < -mu by the a priori contrapositive
    vals = [d.center_re + d.radius
            for s, d in enumerate(disks) if s not in unstable_idx]
    if any_outside:
        vals.append(Interval.point(-mu_apriori))
    stable_re = imax(*vals) if vals else Interval.point(-mu_apriori)
    unstable = [disks[t] for t in unstable_idx]
    return StabilityCertificate(
        problem_name, "generalized", lambda_max, mu_apriori, False,
        disks, ZERO, len(unstable_idx), unstable, stable_re)


def prove_stability_generalized(ctx: StabilityContext, p0: np.ndarray,
                                mu=None, refine=1) -> StabilityCertificate:
    lam, _, mu_used = apriori_lambda_max(ctx.p, ctx.cert, mu)
    delta, mus, lam_final, parts = generalized_disks(ctx, p0, lam,
                                                     refine=refine)
    cert = count_unstable_generalized(ctx.p.name, mus, delta, lam_final,
                                      mu_used)
    cert.delta = delta
    cert.parts = parts
    return cert


def reverify_stability(cert: StabilityCertificate) -> bool:
    """Standalone re-check of a stability certificate from stored intervals.

    Re-runs the disk classification and counting logic on the serialized
    disks; no bound recomputation happens."""
    if not cert.ok:
        return False
    if cert.method == "gershgorin":
        redo = count_unstable_gershgorin(
            cert.problem, cert.disks, cert.tail_radius, cert.lambda_max,
            cert.eigs_real, cert.mu_apriori)
        return redo.ok and redo.n_unstable == cert.n_unstable
    if cert.method == "generalized":
        if not cert.delta.hi < 1.0:
            return False
        n_u = 0
        unstable = []
        for t, d in enumerate(cert.disks):
            lo_re = d.center_re.lo - d.radius.hi
            hi_re = d.center_re.hi + d.radius.hi
            mag = (d.center_re * d.center_re
                   + d.center_im * d.center_im).sqrt() + d.radius
            if lo_re > 0.0 and mag.hi < cert.lambda_max.lo:
                n_u += 1
                unstable.append(t)
            elif hi_re < 0.0:
                continue
            else:
                return False
        for t in unstable:
            du = cert.disks[t]
            for s, d in enumerate(cert.disks):
                if s == t:
                    continue
                dre = du.center_re - d.center_re
                dim = du.center_im - d.center_im
                if not (dre * dre + dim * dim).lo > \
                        ((du.radius + d.radius) ** 2).hi:
                    return False
        return n_u == cert.n_unstable
    return False


# -- finite-matrix Gershgorin helpers (tests, brute-force cross-checks) -----------


def matrix_gershgorin_disks(m: IMat, weights=None):
    """Weighted column Gershgorin disks of a plain interval matrix."""
    n = m.shape[0]
    w = np.asarray(weights if weights is not None else np.ones(n), dtype=float)
    disks = []
    for j in range(n):
        rad = ZERO
        for k in range(n):
            if k != j:
                rad = rad + abs(m.entry(k, j)) * Interval.point(w[k] / w[j])
        disks.append(Disk(j, m.entry(j, j), ZERO, rad, "gershgorin_finite"))
    return disks


def count_eigs_in_groups(disks):
    """(group, count) pairs: each isolated group holds exactly len(group)
    eigenvalues, counted with multiplicity."""
    return [(g, len(g)) for g in _disk_groups(disks)]
