import numpy as np
import pytest

from pdecert import numerics
from pdecert.numerics import (NumericsError, TruncatedResidual, approx_eigen,
                              approx_inverse, conv_float, mult_matrix,
                              newton_solve)


def scalar_quadratic():
    # u + u^2 - 6 = 0 has the root u = 2 (the scalar quadratic test)
    return TruncatedResidual(0, {0: np.eye(1)}, 1.0, (2,), [], np.array([-6.0]),
                             np.array([True]))


def test_newton_scalar_quadratic():
    u, rn = newton_solve(scalar_quadratic(), np.array([3.0]), tol=1e-13)
    assert abs(u[0] - 2.0) < 1e-12 and rn <= 1e-13


def test_newton_singular_jacobian():
    # the Jacobian 1 + 2u vanishes at u = -1/2 where the residual is 1/4
    prob = TruncatedResidual(0, {0: np.eye(1)}, 1.0, (2,), [],
                             np.array([0.5]), np.array([True]))
    with pytest.raises(NumericsError):
        newton_solve(prob, np.array([-0.5]), tol=1e-30, max_iter=5)


def test_toy_alpha0_trivial():
    from pdecert.harness import register_toy
    from pdecert.validate import float_problem
    fp = float_problem(register_toy(0.0, 12, selfcheck=False))
    u, rn = newton_solve(fp, 0.1 * np.ones(13), tol=1e-14)
    assert np.abs(u).max() < 1e-14


def test_toy_alpha1_residual():
    from pdecert.harness import solve_toy
    from pdecert.validate import float_problem
    spec, u = solve_toy(1.0, N=30)
    fp = float_problem(spec)
    assert np.abs(fp.residual(u)).sum() <= 1e-14


def test_conv_float_matches_interval_conv():
    from pdecert.seqspace import CoeffSeq
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = rng.normal(size=rng.integers(1, 9))
        b = rng.normal(size=rng.integers(1, 9))
        ref = CoeffSeq.from_floats(a).conv(CoeffSeq.from_floats(b))
        out = conv_float(a, b)
        for n in range(len(out)):
            assert abs(out[n] - ref.entry(n).mid()) < 1e-12


def test_mult_matrix_matches_conv():
    rng = np.random.default_rng(5)
    v = rng.normal(size=6)
    w = rng.normal(size=9)
    m = mult_matrix(v, 16, 9)
    direct = conv_float(v, w)
    via = m @ w
    for n in range(16):
        ref = direct[n] if n < len(direct) else 0.0
        assert abs(via[n] - ref) < 1e-12


def test_approx_inverse():
    assert np.allclose(approx_inverse(np.eye(4)), np.eye(4))
    assert np.allclose(approx_inverse(np.diag([2.0, 4.0])),
                       np.diag([0.5, 0.25]))
    rng = np.random.default_rng(7)
    m = np.eye(10) + 0.1 * rng.normal(size=(10, 10))
    inv = approx_inverse(m)
    assert np.abs(m @ inv - np.eye(10)).max() <= 1e-12
    with pytest.raises(NumericsError):
        approx_inverse(np.zeros((3, 3)))


def test_approx_eigen_diagonal():
    vals, p0, q0 = approx_eigen(np.diag([3.0, 1.0]))
    assert np.allclose(vals, [3.0, 1.0])
    assert np.allclose(np.abs(p0), np.eye(2))


def test_approx_eigen_rotation():
    vals, p0, q0 = approx_eigen(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert sorted(np.round(vals.imag, 12)) == [-1.0, 1.0]
    assert np.allclose(vals.real, 0.0)


def test_approx_eigen_symmetric_residual():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(8, 8))
    m = a + a.T
    vals, p0, q0 = approx_eigen(m)
    assert np.abs(m @ p0 - p0 @ np.diag(vals)).max() <= 1e-10
    assert np.abs(q0 @ p0 - np.eye(8)).max() <= 1e-10
    # ordering: descending real part
    assert np.all(np.diff(vals.real) <= 1e-14)


def test_approx_eigen_real_pairs_block_structure():
    m = np.array([[0.0, -2.0, 0], [2.0, 0.0, 0], [0, 0, -1.0]])
    vals, p0, q0 = approx_eigen(m, real_pairs=True)
    assert not np.iscomplexobj(p0)
    b = q0 @ m @ p0
    # 2x2 rotation block for the conjugate pair, scalar block for the real one
    assert abs(b[0, 2]) + abs(b[1, 2]) + abs(b[2, 0]) + abs(b[2, 1]) < 1e-12
    assert abs(b[0, 0] - b[1, 1]) < 1e-12
    assert abs(b[0, 1] + b[1, 0]) < 1e-12


def test_continuation_identity_and_toy():
    from pdecert.harness import register_toy
    from pdecert.validate import float_problem

    def make(a):
        return float_problem(register_toy(a, 16, selfcheck=False))

    u0 = np.zeros(17)
    u = numerics.continuation(make, 0.0, 0.0, 3, u0)
    assert np.array_equal(u, u0)
    u = numerics.continuation(make, 0.0, 1.0, 10, u0)
    assert np.abs(make(1.0).residual(u)).sum() <= 1e-12
