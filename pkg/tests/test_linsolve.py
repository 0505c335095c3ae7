import random
from fractions import Fraction

import pytest

from pdecert.interval import Interval, ZERO, ONE
from pdecert.linsolve import (IllPosedError, LinearBVP, bc_tail_bound,
                              build_ki, build_linv, dirichlet_col_bound,
                              dirichlet_tail_model, eta_bound, gamma_bound,
                              iv_inverse_small, ks_k0_op, ks_k1_oracle_op,
                              ks_k1_tail_model, ks_k2_op, ks_l1inv_col_bound,
                              ks_operator_norm_bounds, special_inverse_apply)
from pdecert.operators import (BoundarySpec, apply_dk, apply_si, boundary_eval,
                               dirichlet_spec, ks_neumann_spec)
from pdecert.seqspace import CoeffSeq, active_indices, basis_ek, op_norm, unit_e, xi

from test_operators import (cheb_to_monomial, poly_derivative, poly_eval)


DIRICHLET = LinearBVP(1, dirichlet_spec(), "none", 1.0)
KS = LinearBVP(2, ks_neumann_spec(), "odd", 1.0)
ROBIN = LinearBVP(1, BoundarySpec.build(1, [[1.0, 2.0]], [[3.0, -1.0]]), "none", 1.0)
BEAM = LinearBVP(
    2,
    BoundarySpec.build(2, [[1, 0, 0, 0], [0, 1, 0, 0]], [[1, 0, 0, 0], [0, 1, 0, 0]]),
    "none", 1.0)


# -- small interval inverses -----------------------------------------------------

def test_iv_inverse_small():
    rows = [[Interval.point(1.0), Interval.point(-2.0)],
            [Interval.point(1.0), Interval.point(2.0)]]
    inv = iv_inverse_small(rows)
    assert inv[0][0].contains(Fraction(1, 2))
    assert inv[0][1].contains(Fraction(1, 2))
    assert inv[1][0].contains(Fraction(-1, 4))
    assert inv[1][1].contains(Fraction(1, 4))


def test_iv_inverse_singular_raises():
    rows = [[ONE, ONE], [ONE, ONE]]
    with pytest.raises(IllPosedError):
        iv_inverse_small(rows)


# -- gamma / boundary tail bounds -------------------------------------------------

def test_gamma_values():
    # frozen from the corrected induction (see decisions ledger): odd case
    # nu^i k prod 1/(k^2-(2j+1)^2), even case nu^i prod 1/(k^2-(2j)^2)
    assert gamma_bound(1, 4, 1.0).contains(Fraction(4, 15))
    assert gamma_bound(2, 5, 1.0).contains(Fraction(1, 21))
    assert gamma_bound(3, 6, 1.0).contains(Fraction(6, 35 * 27))
    with pytest.raises(ValueError):
        gamma_bound(2, 3, 1.0)


def test_gamma_dominates_antiderivative_columns():
    # acceptance 5(b): ||S^(i) E_k|| <= gamma_{i,k}, i <= 4, k <= 60
    for nu in (1.0, 1.5, 2.0):
        for i in range(1, 5):
            for k in range(2 * i, 61):
                nrm = apply_si(basis_ek(k, nu), i).norm()
                bound = gamma_bound(i, k, nu)
                assert nrm.lo <= bound.hi, (i, k, nu, nrm, bound)


def test_gamma_sharp_for_single_antiderivative():
    # at nu = 1 the i = 1 bound is attained
    for k in (2, 5, 12, 33):
        nrm = apply_si(basis_ek(k, 1.0), 1).norm()
        bound = gamma_bound(1, k, 1.0)
        assert nrm.overlaps(bound)


def test_bc_tail_values():
    assert bc_tail_bound(2, 1, 8, 1.0).contains(Fraction(8, 63))
    assert bc_tail_bound(4, 0, 16, 1.0).contains(Fraction(1, 252 * 240))
    v = bc_tail_bound(2, 1, 8, 2.0)
    assert v.contains(Fraction(8, 63 * 256))
    with pytest.raises(ValueError):
        bc_tail_bound(2, 2, 8, 1.0)
    with pytest.raises(ValueError):
        bc_tail_bound(2, 1, 3, 1.0)


def test_bc_tail_dominates_boundary_values():
    for nu in (1.0, 1.5):
        for i in range(1, 5):
            for j in range(0, i):
                for k in range(2 * i, 40, 3):
                    w = apply_si(basis_ek(k, nu), i)
                    for ep in (1, -1):
                        val = abs(boundary_eval(w, j, ep))
                        bound = bc_tail_bound(i, j, k, nu)
                        assert val.lo <= bound.hi, (i, j, k, nu, ep)


# -- the Dirichlet solution operator ------------------------------------------------

def test_dirichlet_inverse_of_e4_exact_values():
    expected = [Fraction(-1, 60), 0, Fraction(1, 48), 0,
                Fraction(-1, 60), 0, Fraction(1, 240)]
    col_special = special_inverse_apply("dirichlet", basis_ek(4, 1.0))
    op = build_linv(DIRICHLET, selfcheck_upto=8)
    col_generic = op.apply(basis_ek(4, 1.0))
    for n, e in enumerate(expected):
        assert col_special.entry(n).contains(Fraction(e)), ("special", n)
        assert col_generic.entry(n).contains(Fraction(e)), ("generic", n)
    assert col_generic.support_end() == 7


def test_dirichlet_norm_bound():
    for nu in (1.0, 1.5, 2.0):
        bvp = LinearBVP(1, dirichlet_spec(), "none", nu)
        op = build_linv(bvp, tail_model=dirichlet_tail_model(nu))
        cols = [op.column(n).norm() for n in range(31)]
        nrm = op_norm(cols, 30, nu, tail_bound=op.tail_col_norm(31))
        cap = (1 + nu * nu) / 4
        assert nrm.hi <= cap + 1e-12, (nu, nrm)
    # nu = 1: certified ||L0^-1|| <= 1/2 and not vacuously small
    op = build_linv(DIRICHLET, tail_model=dirichlet_tail_model(1.0))
    cols = [op.column(n).norm() for n in range(31)]
    nrm = op_norm(cols, 30, 1.0, tail_bound=op.tail_col_norm(31))
    assert nrm.hi <= 0.5 and nrm.hi > 0.2


def test_boundary_rows_annihilated():
    op = build_linv(DIRICHLET)
    rows = dirichlet_spec().functionals()
    for k in range(0, 20):
        col = op.column(k)
        for row in rows:
            assert row.apply(col).contains_zero(), k


def test_generic_vs_explicit_dirichlet_50():
    op = build_linv(DIRICHLET)
    for k in range(0, 51):
        a = op.apply(basis_ek(k, 1.0))
        b = special_inverse_apply("dirichlet", basis_ek(k, 1.0))
        for n in range(max(len(a), len(b))):
            assert a.entry(n).overlaps(b.entry(n)), (k, n)


def test_generic_vs_explicit_neumann_odd_50():
    op = build_linv(LinearBVP(1, BoundarySpec.build(
        1, [[0.0, 1.0]], [[0.0, 1.0]]), "odd", 1.0))
    for k in range(1, 51, 2):
        a = op.apply(basis_ek(k, 1.0))
        b = special_inverse_apply("neumann_odd", basis_ek(k, 1.0))
        for n in range(max(len(a), len(b))):
            assert a.entry(n).overlaps(b.entry(n)), (k, n)


def test_special_inverse_examples():
    col = special_inverse_apply("neumann_odd", basis_ek(1, 1.0))
    assert col.entry(1).contains(Fraction(-3, 16))
    z = special_inverse_apply("dirichlet", CoeffSeq.zeros(4))
    assert z.support_end() == 0
    with pytest.raises(ValueError):
        special_inverse_apply("neumann_odd", basis_ek(2, 1.0))


def test_dirichlet_sharp_tail_beats_generic_eta():
    op = build_linv(DIRICHLET)
    sharp = dirichlet_col_bound(10, 1.0)
    generic = eta_bound(op, 10)
    assert sharp.hi < generic.lo
    # and both dominate the actual column norm
    actual = op.col_norm_normalized(10)
    assert actual.lo <= sharp.hi


def test_dirichlet_col_bound_validity():
    for nu in (1.0, 1.5):
        bvp = LinearBVP(1, dirichlet_spec(), "none", nu)
        op = build_linv(bvp)
        for k in range(5, 61):
            actual = op.col_norm_normalized(k)
            assert actual.lo <= dirichlet_col_bound(k, nu).hi, (nu, k)


# -- residual oracle across problems ---------------------------------------------------

@pytest.mark.parametrize("bvp", [DIRICHLET, ROBIN, KS, BEAM],
                         ids=["dirichlet", "robin", "ks", "beam"])
def test_solution_operator_residual_oracle(bvp):
    """v = G0(Linv E_k) must satisfy sign * d^2m v = T_k and the boundary
    conditions, checked by exact polynomial differentiation of midpoints."""
    op = build_linv(bvp, selfcheck_upto=10)
    two_m = 2 * bvp.m
    for k in active_indices(bvp.parity, 13):
        col = op.column(k)
        mids = [c.mid() for c in col.coeffs]
        widths = [c.width() for c in col.coeffs]
        mono = cheb_to_monomial(mids)
        d2m = poly_derivative(mono, two_m)
        # tolerance: coefficient widths amplified by the derivative growth
        from test_operators import t_deriv_at_one
        tol = sum(2 * w * float(t_deriv_at_one(n, two_m))
                  for n, w in enumerate(widths)) + 1e-10
        for idx in range(20):
            x = Fraction(2 * idx, 19) - 1
            lhs = bvp.sign * float(poly_eval(d2m, x))
            # columns act on raw unit vectors e_k, whose series is xi_k T_k
            tk = xi(k) * float(poly_eval(cheb_to_monomial(
                [0.0] * k + [0.5 if k else 1.0]), x))
            assert abs(lhs - tk) <= tol, (k, idx, lhs, tk)
        for row in bvp.bspec.functionals():
            val = row.apply(col)
            assert val.lo <= tol and val.hi >= -tol, (k, "bc")


@pytest.mark.parametrize("bvp,i", [(DIRICHLET, 1), (ROBIN, 1), (KS, 1),
                                   (KS, 2), (KS, 3), (BEAM, 1), (BEAM, 2)],
                         ids=["dir1", "rob1", "ks1", "ks2", "ks3", "beam1", "beam2"])
def test_ki_is_derivative_of_solution(bvp, i):
    """K_i E_k must be the i-th derivative of G0(Linv E_k) (function space)."""
    linv = build_linv(bvp)
    ki = build_ki(bvp, i)
    for k in active_indices(bvp.parity, 10):
        base = linv.column(k)
        mono = cheb_to_monomial([c.mid() for c in base.coeffs])
        di = poly_derivative(mono, i)
        col = ki.column(k)
        tol = 1e-8
        for x in (Fraction(-9, 10), Fraction(-1, 3), Fraction(0),
                  Fraction(1, 2), Fraction(1)):
            val = col.evaluate(Interval.from_fraction(x))
            oracle = float(poly_eval(di, x))
            assert val.lo - tol <= oracle <= val.hi + tol, (k, x)


# -- K_i structure ------------------------------------------------------------------

def test_k0_equals_linv():
    linv = build_linv(DIRICHLET)
    k0 = build_ki(DIRICHLET, 0)
    for k in range(0, 12):
        a, b = linv.column(k), k0.column(k)
        for n in range(max(len(a), len(b))):
            assert a.entry(n).overlaps(b.entry(n))


def test_ki_bandwidth_structure():
    for bvp, imax_ in [(DIRICHLET, 2), (KS, 4), (BEAM, 4)]:
        for i in range(0, imax_):
            op = build_ki(bvp, i)
            pad = op.range_pad
            for k in active_indices(bvp.parity, 25, lo=10):
                col = op.column(k)
                assert col.support_end() <= k + pad + 1
                for n in range(max(op.head_slots, default=-1) + 1, k - pad):
                    assert col.entry(n) == ZERO, (i, k, n)


def test_ks_k1_matches_factored_oracle():
    """Generic Schur-complement K_1 vs -S L1^-1 (dual independent paths)."""
    generic = build_ki(KS, 1)
    oracle = ks_k1_oracle_op()
    for k in range(1, 40, 2):
        a = generic.column(k)
        b = oracle.column(k)
        for n in range(max(len(a), len(b))):
            assert a.entry(n).overlaps(b.entry(n)), (k, n)


def test_ks_k0_factored_vs_generic():
    generic = build_linv(KS)
    fact = ks_k0_op()
    for k in range(1, 30, 2):
        a = generic.column(k)
        b = fact.column(k)
        for n in range(max(len(a), len(b))):
            assert a.entry(n).overlaps(b.entry(n)), (k, n)


def test_ks_k2_factored_vs_generic():
    generic = build_ki(KS, 2)
    fact = ks_k2_op()
    for k in range(1, 30, 2):
        a = generic.column(k)
        b = fact.column(k)
        for n in range(max(len(a), len(b))):
            assert a.entry(n).overlaps(b.entry(n)), (k, n)


# -- eta bounds -----------------------------------------------------------------------

def test_eta_dominates_columns_high_order():
    # i = 2m-1 columns decay like 1/k, bounded by eta for k = 4m+1..4m+21
    for bvp in (DIRICHLET, KS):
        i = 2 * bvp.m - 1
        op = build_ki(bvp, i)
        for k in active_indices(bvp.parity, 4 * bvp.m + 22, lo=4 * bvp.m + 1):
            nrm = op.col_norm_normalized(k)
            bound = eta_bound(op, k)
            assert nrm.lo <= bound.hi, (bvp.m, k)


def test_eta_all_orders_validity():
    for bvp in (DIRICHLET, ROBIN, KS, BEAM):
        for i in range(0, 2 * bvp.m):
            op = build_ki(bvp, i)
            for k in active_indices(bvp.parity, 4 * bvp.m + 30, lo=4 * bvp.m + 1):
                nrm = op.col_norm_normalized(k)
                bound = eta_bound(op, k)
                assert nrm.lo <= bound.hi, (bvp.m, i, k)


def test_eta_monotone_and_dominates_gamma():
    for bvp in (DIRICHLET, KS):
        op = build_linv(bvp)
        prev = None
        for k in range(4 * bvp.m + 1, 4 * bvp.m + 51):
            e = eta_bound(op, k)
            assert e.hi >= gamma_bound(2 * bvp.m, k, 1.0).lo
            if prev is not None:
                assert e.hi <= prev.hi * (1 + 1e-9), k
            prev = e


def test_norm_cap_generic():
    op = build_linv(DIRICHLET, tail_model=dirichlet_tail_model(1.0))
    assert op.norm_cap().hi <= 0.5 + 1e-12
    op_generic = build_linv(DIRICHLET)
    assert op_generic.norm_cap().hi < 2.0  # finite and sane


# -- KS certified norms ------------------------------------------------------------------

def test_ks_operator_norm_bounds():
    caps = ks_operator_norm_bounds(200)
    assert caps["l1inv"].hi <= 0.42
    assert caps["l1inv_sq"].hi <= 0.17
    assert caps["d_l1inv_sq"].hi <= 0.31
    # not vacuous
    assert caps["l1inv"].hi > 0.3
    assert caps["l1inv_sq"].hi > 0.1
    assert caps["d_l1inv_sq"].hi > 0.2


def test_ks_l1inv_col_bound_validity():
    for k in range(5, 61, 2):
        col = special_inverse_apply("neumann_odd", basis_ek(k, 1.0))
        assert col.norm().lo <= ks_l1inv_col_bound(k).hi, k


def test_ks_k1_tail_validity():
    op = ks_k1_oracle_op()
    tm = ks_k1_tail_model()
    for k in range(9, 61, 2):
        assert op.col_norm_normalized(k).lo <= tm.col_norm(k).hi, k


# -- Schur-complement identity -----------------------------------------------------------

def test_tilde_l_inverse_formula():
    """Check the block (Schur) inverse: applying the assembled formula to
    tilde-L e_n returns e_n (toy problem, n <= 12)."""
    from pdecert.operators import apply_ddag, apply_shift, change_basis
    bvp = DIRICHLET
    op = build_linv(bvp)
    rows = [bvp.bspec.functionals()[r] for r in (0, 1)]
    m2 = 2 * bvp.m
    for n in range(0, 13):
        e = unit_e(n, 1.0)
        # y = tilde-L e_n = B e_n (head) + sign Sigma^2m D_2m e_n
        y = [rows[0].on_unit(n), rows[1].on_unit(n)]
        diag = apply_shift(apply_dk(e, m2), m2).replace(basis=0, check=False)
        y_seq = CoeffSeq([y[0], y[1]] + list(diag.coeffs[2:]), 0, 1.0).scale(1.0)
        tail = diag.scale(Interval.point(bvp.sign))
        y_full = CoeffSeq(
            [y[0], y[1]] + [tail.entry(k) for k in range(2, max(len(tail), 3))], 0, 1.0)
        # z = (Bdag - sign Bdag B Ddag + sign Ddag) y
        dd = apply_ddag(y_full, m2)
        bdd = [rows[0].apply(dd), rows[1].apply(dd)]
        z = list(dd.coeffs)
        while len(z) < 2:
            z.append(ZERO)
        for t in range(2):
            corr_head = sum((op.bdag[t][s] * y_full.entry(s) for s in range(2)), ZERO)
            corr_b = sum((op.bdag[t][s] * bdd[s] for s in range(2)), ZERO)
            z[t] = z[t] * Interval.point(bvp.sign) + corr_head \
                - Interval.point(bvp.sign) * corr_b
        for t in range(2, len(z)):
            z[t] = z[t] * Interval.point(bvp.sign)
        for k in range(len(z)):
            target = ONE if k == n else ZERO
            zi = z[k]
            assert zi.lo - 1e-10 <= (1.0 if k == n else 0.0) <= zi.hi + 1e-10, (n, k)
        del y_seq, target
