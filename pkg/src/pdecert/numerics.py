"""Non-rigorous floating-point kernel.

Produces the approximate data that the rigorous layer certifies afterwards:
the Newton/continuation approximation of the zero of the truncated residual,
the dense approximate inverse A0 of the truncated Jacobian, and the
approximate eigendecomposition P0 used for pseudo-diagonalization.  Nothing
here carries rigor claims; every output is validated downstream.
"""

from __future__ import annotations

import numpy as np


class NumericsError(RuntimeError):
    pass


def conv_float(u, v):
    """Chebyshev product of float coefficient vectors (full support)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    # symmetrize over negative indices and convolve
    us = np.concatenate([u[:0:-1], u])
    vs = np.concatenate([v[:0:-1], v])
    full = np.convolve(us, vs)
    center = len(u) - 1 + len(v) - 1
    return full[center:]


def mult_matrix(v, rows, cols):
    """Matrix of W -> v * W on coefficients: M[n,q] = v_|n-q| + (q>0) v_(n+q)."""
    v = np.asarray(v, dtype=float)
    vpad = np.zeros(rows + cols + 1)
    vpad[: len(v)] = v
    n = np.arange(rows)[:, None]
    q = np.arange(cols)[None, :]
    m = vpad[np.abs(n - q)].astype(float)
    m[:, 1:] += vpad[(n + q)[:, 1:]]
    return m


class TruncatedResidual:
    """pi^{<=N} F pi^{<=N} and its Jacobian, in plain floats.

    ``kmats[i]`` maps coefficients (cols 0..N) to K_i of them (rows
    0..N+pad_i); the residual is u + coeff * prod_i (K_i u)^(j_i) +
    sum linear_l K_(i_l) u + psi, projected back to 0..N.  Inactive parity
    indices are pinned to zero through identity rows in the Jacobian.
    """

    def __init__(self, N, kmats, coeff, exponents, linear, psi, active_mask):
        self.N = N
        self.kmats = kmats
        self.coeff = float(coeff)
        self.exponents = tuple(exponents)
        self.linear = [(float(c), i) for c, i in linear]
        self.psi = np.asarray(psi, dtype=float)
        self.active = np.asarray(active_mask, dtype=bool)

    def _nl_factors(self, u):
        return {i: self.kmats[i] @ u
                for i, j in enumerate(self.exponents) if j > 0}

    def residual(self, u):
        n1 = self.N + 1
        out = u.copy()
        fac = self._nl_factors(u)
        if self.coeff != 0.0 and fac:
            prod = None
            for i, j in enumerate(self.exponents):
                for _ in range(j):
                    prod = fac[i] if prod is None else conv_float(prod, fac[i])
            out = out + self.coeff * prod[:n1][: n1]
        for c, i in self.linear:
            out = out + c * (self.kmats[i] @ u)[:n1]
        if len(self.psi):
            out[: len(self.psi)] += self.psi[:n1]
        out[~self.active] = 0.0
        return out[:n1]

    def jacobian(self, u):
        n1 = self.N + 1
        jac = np.eye(n1)
        fac = self._nl_factors(u)
        if self.coeff != 0.0 and fac:
            for i, j in enumerate(self.exponents):
                if j == 0:
                    continue
                # multiplier of K_i h: coeff * j * fac_i^(j-1) * prod_others
                mult = np.array([self.coeff * j])
                for l, jl in enumerate(self.exponents):
                    power = jl - 1 if l == i else jl
                    for _ in range(power):
                        mult = conv_float(mult, fac[l])
                mm = mult_matrix(mult, n1, self.kmats[i].shape[0])
                jac = jac + mm @ self.kmats[i]
        for c, i in self.linear:
            jac = jac + c * self.kmats[i][:n1, :]
        # pin inactive indices
        for idx in np.nonzero(~self.active)[0]:
            jac[idx, :] = 0.0
            jac[:, idx] = 0.0
            jac[idx, idx] = 1.0
        return jac


def newton_solve(problem: TruncatedResidual, u0, tol=1e-13, max_iter=40):
    """Damped Newton on the truncated residual; returns (u, residual_norm)."""
    u = np.asarray(u0, dtype=float).copy()
    u[~problem.active] = 0.0
    best = None
    for _ in range(max_iter):
        r = problem.residual(u)
        rn = float(np.abs(r).sum())
        if best is None or rn < best:
            best = rn
        if rn <= tol:
            return u, rn
        jac = problem.jacobian(u)
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError as exc:
            raise NumericsError(f"singular Jacobian: {exc}") from exc
        lam = 1.0
        for _ in range(12):
            cand = u - lam * step
            cand[~problem.active] = 0.0
            if float(np.abs(problem.residual(cand)).sum()) < rn or lam < 1e-6:
                u = cand
                break
            lam *= 0.5
        else:
            raise NumericsError("line search failed")
    r = problem.residual(u)
    rn = float(np.abs(r).sum())
    if rn <= tol:
        return u, rn
    raise NumericsError(f"Newton did not reach tol={tol}; residual {rn}")


def continuation(make_problem, alpha_from, alpha_to, steps, u0,
                 tol=1e-13, max_iter=40):
    """Stepped Newton in the parameter; bisects the step on failure."""
    u = np.asarray(u0, dtype=float).copy()
    alpha = float(alpha_from)
    target = float(alpha_to)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    da = (target - alpha) / steps
    guard = 0
    while abs(target - alpha) > 0:
        step = da if abs(da) < abs(target - alpha) else (target - alpha)
        try:
            u_next, _ = newton_solve(make_problem(alpha + step), u,
                                     tol=tol, max_iter=max_iter)
            u = u_next
            alpha += step
        except NumericsError:
            da *= 0.5
            guard += 1
            if guard > 60:
                raise NumericsError(
                    f"continuation stalled at alpha={alpha}") from None
    return u


def approx_inverse(m):
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NumericsError("non-finite matrix")
    try:
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"numerically singular: {exc}") from exc
    return inv


def _xi_vec(idx):
    return np.where(np.asarray(idx) == 0, 1.0, 2.0)


def approx_eigen(m, index_map=None, real_pairs=False):
    """Eigendecomposition with deterministic ordering and normalization.

    Eigenvalues are sorted by descending real part (tie-break: |mu|, then
    original position), so that unstable candidates occupy the leading
    columns.  With ``real_pairs`` a real matrix keeps a real basis: each
    complex-conjugate pair contributes (Re v, Im v) columns.  Columns are
    scaled so their largest-magnitude entry equals one (this keeps the
    inverse basis well conditioned in the weighted l1 norm, which controls
    the Gershgorin tail radii downstream).
    Returns (eigenvalues, P0, P0_inverse).
    """
    m = np.asarray(m)
    vals, vecs = np.linalg.eig(m)
    order = sorted(range(len(vals)),
                   key=lambda t: (-vals[t].real, -abs(vals[t]), t))
    vals = vals[order]
    vecs = vecs[:, order]
    if real_pairs and not np.iscomplexobj(m):
        cols = np.empty_like(vecs, dtype=float)
        t = 0
        while t < len(vals):
            if abs(vals[t].imag) > 0:
                cols[:, t] = vecs[:, t].real
                if t + 1 < len(vals):
                    cols[:, t + 1] = vecs[:, t].imag
                    t += 2
                    continue
            cols[:, t] = vecs[:, t].real
            t += 1
        vecs = cols
    elif not np.iscomplexobj(m) and np.all(np.abs(vals.imag) == 0):
        vals = vals.real
        vecs = vecs.real
    piv = np.abs(vecs).argmax(axis=0)
    scales = vecs[piv, np.arange(vecs.shape[1])]
    if np.any(scales == 0):
        raise NumericsError("zero eigenvector column")
    vecs = vecs / scales[None, :]
    try:
        inv = np.linalg.inv(vecs)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"eigenvector matrix singular: {exc}") from exc
    return vals, vecs, inv
