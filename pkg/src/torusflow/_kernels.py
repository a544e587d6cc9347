"""Numba kernels for the nonlinear flow.

The right-hand side treats (d0 u, d0 A, d0 G) as the only differenced
primitives; every other xi-derivative (products, inverse metric, the DeTurck
one-form and its raised vector field) is expanded by the Leibniz rule, so the
discrete linearization at the stationary datum agrees with the assembled
linear operators to rounding error.

Status codes returned by the kernels: 0 ok, 1 u <= 0, 2 G not positive
definite, 3 degenerate base metric (u - A.G.A <= 0).
"""

from __future__ import annotations

import numpy as np
from numba import njit

OK = 0
BAD_U = 1
BAD_G = 2
BAD_W = 3


@njit(cache=True, inline="always")
def _mm(a, b, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


@njit(cache=True, inline="always")
def _mv(a, x, out):
    n = a.shape[0]
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc += a[i, k] * x[k]
        out[i] = acc


@njit(cache=True)
def _inv_gauss(a, out, work):
    """Inverse by Gauss-Jordan with partial pivoting; work is (n, 2n)."""
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            work[i, j] = a[i, j]
            work[i, n + j] = 1.0 if i == j else 0.0
    for col in range(n):
        piv = col
        best = abs(work[col, col])
        for r in range(col + 1, n):
            if abs(work[r, col]) > best:
                best = abs(work[r, col])
                piv = r
        if best == 0.0:
            return False
        if piv != col:
            for j in range(2 * n):
                tmp = work[col, j]
                work[col, j] = work[piv, j]
                work[piv, j] = tmp
        inv_p = 1.0 / work[col, col]
        for j in range(2 * n):
            work[col, j] *= inv_p
        for r in range(n):
            if r != col and work[r, col] != 0.0:
                f = work[r, col]
                for j in range(2 * n):
                    work[r, j] -= f * work[col, j]
    for i in range(n):
        for j in range(n):
            out[i, j] = work[i, n + j]
    return True


@njit(cache=True)
def _cholesky_ok(a, buf):
    """True iff symmetric a is positive definite (in-place Cholesky on buf)."""
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            buf[i, j] = a[i, j]
    for j in range(n):
        d = buf[j, j]
        for k in range(j):
            d -= buf[j, k] * buf[j, k]
        if d <= 0.0:
            return False
        buf[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            s = buf[i, j]
            for k in range(j):
                s -= buf[i, k] * buf[j, k]
            buf[i, j] = s / buf[j, j]
    return True


@njit(cache=True)
def _fill_ext(u, A, G, lt, l, lti, li, ue, Ae, Ge, tmp):
    """Extended arrays with two ghosts each side (periodic u, A; twisted G)."""
    n = u.shape[0]
    nf = A.shape[1]
    for m in range(n):
        ue[m + 2] = u[m]
        for i in range(nf):
            Ae[m + 2, i] = A[m, i]
            for j in range(nf):
                Ge[m + 2, i, j] = G[m, i, j]
    for k in range(2):
        ue[k] = u[n - 2 + k]
        ue[n + 2 + k] = u[k]
        for i in range(nf):
            Ae[k, i] = A[n - 2 + k, i]
            Ae[n + 2 + k, i] = A[k, i]
        _mm(lti, G[n - 2 + k], tmp)
        _mm(tmp, li, Ge[k])
        _mm(lt, G[k], tmp)
        _mm(tmp, l, Ge[n + 2 + k])


@njit(cache=True)
def _rhs_into(
    u, A, G,
    dxi, c, s, C, deturck,
    lt, l, lti, li,
    ue, Ae, Ge, d0u_e, d0A_e,
    ginv, d0G, d0sqG, d0a, a_vec, d0A_m, d2A_m,
    m1, m2, m3, chol, gwork,
    gi, dg, dgi, pwork, vv, dvv, xv, dxv, lj0,
    du, dA, dG,
):
    """Flow right-hand side at every node; returns (status, node)."""
    n = u.shape[0]
    nf = A.shape[1]
    _fill_ext(u, A, G, lt, l, lti, li, ue, Ae, Ge, m1)
    half = 0.5 / dxi
    for i in range(1, n + 3):
        d0u_e[i] = (ue[i + 1] - ue[i - 1]) * half
        for p in range(nf):
            d0A_e[i, p] = (Ae[i + 1, p] - Ae[i - 1, p]) * half
    for m in range(n):
        i = m + 2
        um = ue[i]
        if um <= 0.0:
            return BAD_U, m
        if not _cholesky_ok(Ge[i], chol):
            return BAD_G, m
        if not _inv_gauss(Ge[i], ginv, gwork):
            return BAD_G, m
        for p in range(nf):
            d0A_m[p] = d0A_e[i, p]
            d2A_m[p] = (d0A_e[i + 1, p] - d0A_e[i - 1, p]) * half
            for q in range(nf):
                d0G[p, q] = (Ge[i + 1, p, q] - Ge[i - 1, p, q]) * half
                d0sqG[p, q] = (Ge[i + 1, p, q] - 2.0 * Ge[i, p, q] + Ge[i - 1, p, q]) / (dxi * dxi)
        d0u_m = d0u_e[i]
        d2u_m = (d0u_e[i + 1] - d0u_e[i - 1]) * half
        # a = G A and its Leibniz derivative
        _mv(Ge[i], Ae[i], a_vec)
        _mv(d0G, Ae[i], d0a)
        _mv(Ge[i], d0A_m, m3[0])  # reuse row 0 of m3 as a scratch vector
        for p in range(nf):
            d0a[p] += m3[0, p]
        a_dot_A = 0.0
        for p in range(nf):
            a_dot_A += Ae[i, p] * a_vec[p]
        w = um - a_dot_A
        if w <= 0.0:
            return BAD_W, m
        # Gamma^0_00 = (d0u/2 - A . d0a) / w
        a_dot_d0a = 0.0
        for p in range(nf):
            a_dot_d0a += Ae[i, p] * d0a[p]
        gamma000 = (0.5 * d0u_m - a_dot_d0a) / w
        # |d0G|^2_G = tr(Ginv d0G Ginv d0G)
        _mm(ginv, d0G, m1)
        normsq = 0.0
        for p in range(nf):
            for q in range(nf):
                normsq += m1[p, q] * m1[q, p]
        l00 = 0.0
        for p in range(nf):
            lj0[p] = 0.0
        if deturck:
            # full metric, inverse, their Leibniz derivatives, V and X = g^{-1} V
            gi[0, 0] = 1.0 / w
            for p in range(nf):
                gi[0, p + 1] = -Ae[i, p] / w
                gi[p + 1, 0] = gi[0, p + 1]
                for q in range(nf):
                    gi[p + 1, q + 1] = ginv[p, q] + Ae[i, p] * Ae[i, q] / w
            dg[0, 0] = d0u_m
            for p in range(nf):
                dg[0, p + 1] = d0a[p]
                dg[p + 1, 0] = d0a[p]
                for q in range(nf):
                    dg[p + 1, q + 1] = d0G[p, q]
            # d0(g^{-1}) = -g^{-1} d0g g^{-1}
            for p in range(nf + 1):
                for q in range(nf + 1):
                    acc = 0.0
                    for r in range(nf + 1):
                        acc += dg[p, r] * gi[r, q]
                    pwork[p, q] = acc
            for p in range(nf + 1):
                for q in range(nf + 1):
                    acc = 0.0
                    for r in range(nf + 1):
                        acc += gi[p, r] * pwork[r, q]
                    dgi[p, q] = -acc
            vv[0] = 0.5 * C * d0u_m
            dvv[0] = 0.5 * C * d2u_m
            _mv(Ge[i], d0A_m, m3[1])
            _mv(d0G, d0A_m, m3[2])
            _mv(Ge[i], d2A_m, m3[0])
            for p in range(nf):
                vv[p + 1] = m3[1, p]
                dvv[p + 1] = m3[2, p] + m3[0, p]
            for p in range(nf + 1):
                accx = 0.0
                accd = 0.0
                for q in range(nf + 1):
                    accx += gi[p, q] * vv[q]
                    accd += dgi[p, q] * vv[q] + gi[p, q] * dvv[q]
                xv[p] = accx
                dxv[p] = accd
            # Lie-derivative blocks
            a_dot_dxf = 0.0
            for p in range(nf):
                a_dot_dxf += a_vec[p] * dxv[p + 1]
            l00 = xv[0] * d0u_m + 2.0 * (um * dxv[0] + a_dot_dxf)
            for p in range(nf):
                acc = xv[0] * d0a[p] + a_vec[p] * dxv[0]
                for q in range(nf):
                    acc += Ge[i, p, q] * dxv[q + 1]
                lj0[p] = acc
        du[m] = 0.5 * normsq - s * u[m] + l00
        for p in range(nf):
            acc = -(0.5 * (1.0 + c)) * s * A[m, p]
            if deturck:
                for q in range(nf):
                    acc += ginv[p, q] * lj0[q]
            dA[m, p] = acc
        # dG = (d0sqG - Gamma d0G - d0G Ginv d0G)/u + c s G + X^0 d0G
        _mm(ginv, d0G, m1)
        _mm(d0G, m1, m2)
        x0 = xv[0] if deturck else 0.0
        for p in range(nf):
            for q in range(p, nf):
                val = (d0sqG[p, q] - gamma000 * d0G[p, q] - m2[p, q]) / um
                val += c * s * G[m, p, q]
                if deturck:
                    val += x0 * d0G[p, q]
                dG[m, p, q] = val
                dG[m, q, p] = val
    return OK, -1


@njit(cache=True)
def _alloc(n, nf):
    ue = np.empty(n + 4)
    Ae = np.empty((n + 4, nf))
    Ge = np.empty((n + 4, nf, nf))
    d0u_e = np.empty(n + 4)
    d0A_e = np.empty((n + 4, nf))
    ginv = np.empty((nf, nf))
    d0G = np.empty((nf, nf))
    d0sqG = np.empty((nf, nf))
    d0a = np.empty(nf)
    a_vec = np.empty(nf)
    d0A_m = np.empty(nf)
    d2A_m = np.empty(nf)
    m1 = np.empty((nf, nf))
    m2 = np.empty((nf, nf))
    m3 = np.empty((max(nf, 3), nf))
    chol = np.empty((nf, nf))
    gwork = np.empty((nf, 2 * nf))
    gi = np.empty((nf + 1, nf + 1))
    dg = np.empty((nf + 1, nf + 1))
    dgi = np.empty((nf + 1, nf + 1))
    pwork = np.empty((nf + 1, nf + 1))
    vv = np.empty(nf + 1)
    dvv = np.empty(nf + 1)
    xv = np.empty(nf + 1)
    dxv = np.empty(nf + 1)
    lj0 = np.empty(nf)
    return (ue, Ae, Ge, d0u_e, d0A_e, ginv, d0G, d0sqG, d0a, a_vec, d0A_m, d2A_m,
            m1, m2, m3, chol, gwork, gi, dg, dgi, pwork, vv, dvv, xv, dxv, lj0)


@njit(cache=True)
def rhs_alloc(u, A, G, dxi, c, s, C, deturck, lt, l, lti, li):
    """One-shot right-hand side evaluation (allocates its own scratch)."""
    n = u.shape[0]
    nf = A.shape[1]
    scratch = _alloc(n, nf)
    du = np.empty(n)
    dA = np.empty((n, nf))
    dG = np.empty((n, nf, nf))
    status, node = _rhs_into(u, A, G, dxi, c, s, C, deturck, lt, l, lti, li,
                             *scratch, du, dA, dG)
    return status, node, du, dA, dG


@njit(cache=True)
def rk4_chunk(u, A, G, dxi, c, s, C, deturck, cfl, lt, l, lti, li,
              tau0, tau_stop, max_steps, dt_override=0.0):
    """Integrate in place from tau0 toward tau_stop with classical RK4.

    dt is re-evaluated every step from the parabolic CFL rule
    dt = cfl * dxi^2 / (2 max(1/min(u), C_if_deturck, 1)), clamped so the
    chunk lands exactly on tau_stop.  A positive dt_override bypasses the
    CFL rule.  Returns (status, bad_node, tau, steps).
    """
    n = u.shape[0]
    nf = A.shape[1]
    scratch = _alloc(n, nf)
    k1u = np.empty(n); k1A = np.empty((n, nf)); k1G = np.empty((n, nf, nf))
    k2u = np.empty(n); k2A = np.empty((n, nf)); k2G = np.empty((n, nf, nf))
    k3u = np.empty(n); k3A = np.empty((n, nf)); k3G = np.empty((n, nf, nf))
    k4u = np.empty(n); k4A = np.empty((n, nf)); k4G = np.empty((n, nf, nf))
    su = np.empty(n); sA = np.empty((n, nf)); sG = np.empty((n, nf, nf))
    tau = tau0
    steps = 0
    while tau < tau_stop - 1e-15 and steps < max_steps:
        if dt_override > 0.0:
            dt = dt_override
        else:
            umin = u[0]
            for m in range(1, n):
                if u[m] < umin:
                    umin = u[m]
            if umin <= 0.0:
                return BAD_U, 0, tau, steps
            denom = 1.0 / umin
            if deturck and C > denom:
                denom = C
            if denom < 1.0:
                denom = 1.0
            dt = cfl * dxi * dxi / (2.0 * denom)
        if tau + dt > tau_stop:
            dt = tau_stop - tau
        st, node = _rhs_into(u, A, G, dxi, c, s, C, deturck, lt, l, lti, li,
                             *scratch, k1u, k1A, k1G)
        if st != OK:
            return st, node, tau, steps
        _axpy_state(u, A, G, k1u, k1A, k1G, 0.5 * dt, su, sA, sG)
        st, node = _rhs_into(su, sA, sG, dxi, c, s, C, deturck, lt, l, lti, li,
                             *scratch, k2u, k2A, k2G)
        if st != OK:
            return st, node, tau, steps
        _axpy_state(u, A, G, k2u, k2A, k2G, 0.5 * dt, su, sA, sG)
        st, node = _rhs_into(su, sA, sG, dxi, c, s, C, deturck, lt, l, lti, li,
                             *scratch, k3u, k3A, k3G)
        if st != OK:
            return st, node, tau, steps
        _axpy_state(u, A, G, k3u, k3A, k3G, dt, su, sA, sG)
        st, node = _rhs_into(su, sA, sG, dxi, c, s, C, deturck, lt, l, lti, li,
                             *scratch, k4u, k4A, k4G)
        if st != OK:
            return st, node, tau, steps
        sixth = dt / 6.0
        for m in range(n):
            u[m] += sixth * (k1u[m] + 2.0 * k2u[m] + 2.0 * k3u[m] + k4u[m])
            for p in range(nf):
                A[m, p] += sixth * (k1A[m, p] + 2.0 * k2A[m, p] + 2.0 * k3A[m, p] + k4A[m, p])
                for q in range(nf):
                    G[m, p, q] += sixth * (k1G[m, p, q] + 2.0 * k2G[m, p, q]
                                           + 2.0 * k3G[m, p, q] + k4G[m, p, q])
        tau += dt
        steps += 1
    return OK, -1, tau, steps


@njit(cache=True, inline="always")
def _axpy_state(u, A, G, ku, kA, kG, h, ou, oA, oG):
    n = u.shape[0]
    nf = A.shape[1]
    for m in range(n):
        ou[m] = u[m] + h * ku[m]
        for p in range(nf):
            oA[m, p] = A[m, p] + h * kA[m, p]
            for q in range(nf):
                oG[m, p, q] = G[m, p, q] + h * kG[m, p, q]


# ---------------------------------------------------------------------------
# N = 2 fast path: structure-of-arrays, fully unrolled, branch-free node loop.
# Semantically identical to _rhs_into (tested); an order of magnitude faster.
# ---------------------------------------------------------------------------


@njit(cache=True, error_model="numpy")
def _rhs_n2(u, a0, a1, g00, g01, g11,
            dxi, c, s, C, deturck, lt, l, lti, li,
            ue, a0e, a1e, g00e, g01e, g11e, d0ue, d0a0e, d0a1e, flags,
            du, dA0, dA1, dG00, dG01, dG11):
    n = u.shape[0]
    # periodic ghosts for u, A; twisted ghosts for G
    for m in range(n):
        ue[m + 2] = u[m]
        a0e[m + 2] = a0[m]
        a1e[m + 2] = a1[m]
        g00e[m + 2] = g00[m]
        g01e[m + 2] = g01[m]
        g11e[m + 2] = g11[m]
    for k in range(2):
        ue[k] = u[n - 2 + k]
        a0e[k] = a0[n - 2 + k]
        a1e[k] = a1[n - 2 + k]
        ue[n + 2 + k] = u[k]
        a0e[n + 2 + k] = a0[k]
        a1e[n + 2 + k] = a1[k]
        # left ghosts: (Lambda^T)^-1 G Lambda^-1; right: Lambda^T G Lambda
        for side in range(2):
            if side == 0:
                m00, m01, m10, m11 = lti[0, 0], lti[0, 1], lti[1, 0], lti[1, 1]
                q00, q01, q10, q11 = li[0, 0], li[0, 1], li[1, 0], li[1, 1]
                b00, b01, b11 = g00[n - 2 + k], g01[n - 2 + k], g11[n - 2 + k]
            else:
                m00, m01, m10, m11 = lt[0, 0], lt[0, 1], lt[1, 0], lt[1, 1]
                q00, q01, q10, q11 = l[0, 0], l[0, 1], l[1, 0], l[1, 1]
                b00, b01, b11 = g00[k], g01[k], g11[k]
            t00 = m00 * b00 + m01 * b01
            t01 = m00 * b01 + m01 * b11
            t10 = m10 * b00 + m11 * b01
            t11 = m10 * b01 + m11 * b11
            r00 = t00 * q00 + t01 * q10
            r01 = t00 * q01 + t01 * q11
            r11 = t10 * q01 + t11 * q11
            if side == 0:
                g00e[k] = r00
                g01e[k] = r01
                g11e[k] = r11
            else:
                g00e[n + 2 + k] = r00
                g01e[n + 2 + k] = r01
                g11e[n + 2 + k] = r11
    h2 = 0.5 / dxi
    for i in range(1, n + 3):
        d0ue[i] = (ue[i + 1] - ue[i - 1]) * h2
        d0a0e[i] = (a0e[i + 1] - a0e[i - 1]) * h2
        d0a1e[i] = (a1e[i + 1] - a1e[i - 1]) * h2
    ih2 = 1.0 / (dxi * dxi)
    bc = -(0.5 * (1.0 + c)) * s
    for m in range(n):
        i = m + 2
        um = ue[i]
        G00, G01, G11 = g00e[i], g01e[i], g11e[i]
        dG00_ = (g00e[i + 1] - g00e[i - 1]) * h2
        dG01_ = (g01e[i + 1] - g01e[i - 1]) * h2
        dG11_ = (g11e[i + 1] - g11e[i - 1]) * h2
        sG00 = (g00e[i + 1] - 2.0 * G00 + g00e[i - 1]) * ih2
        sG01 = (g01e[i + 1] - 2.0 * G01 + g01e[i - 1]) * ih2
        sG11 = (g11e[i + 1] - 2.0 * G11 + g11e[i - 1]) * ih2
        det = G00 * G11 - G01 * G01
        idet = 1.0 / det
        Gi00 = G11 * idet
        Gi01 = -G01 * idet
        Gi11 = G00 * idet
        A0, A1 = a0e[i], a1e[i]
        d0u_m = d0ue[i]
        d0A0 = d0a0e[i]
        d0A1 = d0a1e[i]
        aa0 = G00 * A0 + G01 * A1
        aa1 = G01 * A0 + G11 * A1
        d0aa0 = dG00_ * A0 + dG01_ * A1 + G00 * d0A0 + G01 * d0A1
        d0aa1 = dG01_ * A0 + dG11_ * A1 + G01 * d0A0 + G11 * d0A1
        w = um - (A0 * aa0 + A1 * aa1)
        iw = 1.0 / w
        kind = OK
        if um <= 0.0:
            kind = BAD_U
        elif G00 <= 0.0 or det <= 0.0:
            kind = BAD_G
        elif w <= 0.0:
            kind = BAD_W
        flags[m] = kind
        gamma = (0.5 * d0u_m - A0 * d0aa0 - A1 * d0aa1) * iw
        # M1 = Ginv d0G
        M100 = Gi00 * dG00_ + Gi01 * dG01_
        M101 = Gi00 * dG01_ + Gi01 * dG11_
        M110 = Gi01 * dG00_ + Gi11 * dG01_
        M111 = Gi01 * dG01_ + Gi11 * dG11_
        normsq = M100 * M100 + 2.0 * M101 * M110 + M111 * M111
        l00 = 0.0
        lj0_0 = 0.0
        lj0_1 = 0.0
        x0 = 0.0
        if deturck:
            d2u = (d0ue[i + 1] - d0ue[i - 1]) * h2
            d2A0 = (d0a0e[i + 1] - d0a0e[i - 1]) * h2
            d2A1 = (d0a1e[i + 1] - d0a1e[i - 1]) * h2
            V0 = 0.5 * C * d0u_m
            Vf0 = G00 * d0A0 + G01 * d0A1
            Vf1 = G01 * d0A0 + G11 * d0A1
            dV0 = 0.5 * C * d2u
            dVf0 = dG00_ * d0A0 + dG01_ * d0A1 + G00 * d2A0 + G01 * d2A1
            dVf1 = dG01_ * d0A0 + dG11_ * d0A1 + G01 * d2A0 + G11 * d2A1
            # inverse-metric blocks and their Leibniz derivatives
            d0w = d0u_m - (d0A0 * aa0 + d0A1 * aa1 + A0 * d0aa0 + A1 * d0aa1)
            diw = -d0w * iw * iw
            # dGinv = -Ginv d0G Ginv = -(M1 @ Ginv)
            dGi00 = -(M100 * Gi00 + M101 * Gi01)
            dGi01 = -(M100 * Gi01 + M101 * Gi11)
            dGi11 = -(M110 * Gi01 + M111 * Gi11)
            gi01 = -A0 * iw
            gi02 = -A1 * iw
            gi11 = Gi00 + A0 * A0 * iw
            gi12 = Gi01 + A0 * A1 * iw
            gi22 = Gi11 + A1 * A1 * iw
            dgi00 = diw
            dgi01 = -d0A0 * iw - A0 * diw
            dgi02 = -d0A1 * iw - A1 * diw
            dgi11 = dGi00 + (2.0 * A0 * d0A0) * iw + A0 * A0 * diw
            dgi12 = dGi01 + (d0A0 * A1 + A0 * d0A1) * iw + A0 * A1 * diw
            dgi22 = dGi11 + (2.0 * A1 * d0A1) * iw + A1 * A1 * diw
            x0 = iw * V0 + gi01 * Vf0 + gi02 * Vf1
            dx0 = dgi00 * V0 + dgi01 * Vf0 + dgi02 * Vf1 \
                + iw * dV0 + gi01 * dVf0 + gi02 * dVf1
            dx1 = dgi01 * V0 + dgi11 * Vf0 + dgi12 * Vf1 \
                + gi01 * dV0 + gi11 * dVf0 + gi12 * dVf1
            dx2 = dgi02 * V0 + dgi12 * Vf0 + dgi22 * Vf1 \
                + gi02 * dV0 + gi12 * dVf0 + gi22 * dVf1
            l00 = x0 * d0u_m + 2.0 * (um * dx0 + aa0 * dx1 + aa1 * dx2)
            lj0_0 = x0 * d0aa0 + aa0 * dx0 + G00 * dx1 + G01 * dx2
            lj0_1 = x0 * d0aa1 + aa1 * dx0 + G01 * dx1 + G11 * dx2
        du[m] = 0.5 * normsq - s * u[m] + l00
        dA0[m] = bc * a0[m] + Gi00 * lj0_0 + Gi01 * lj0_1
        dA1[m] = bc * a1[m] + Gi01 * lj0_0 + Gi11 * lj0_1
        # P = d0G Ginv d0G = d0G @ M1
        P00 = dG00_ * M100 + dG01_ * M110
        P01 = dG00_ * M101 + dG01_ * M111
        P11 = dG01_ * M101 + dG11_ * M111
        iu = 1.0 / um
        cs = c * s
        dG00[m] = iu * (sG00 - gamma * dG00_ - P00) + cs * G00 + x0 * dG00_
        dG01[m] = iu * (sG01 - gamma * dG01_ - P01) + cs * G01 + x0 * dG01_
        dG11[m] = iu * (sG11 - gamma * dG11_ - P11) + cs * G11 + x0 * dG11_
    for m in range(n):
        if flags[m] != OK:
            return m
    return -1


@njit(cache=True, error_model="numpy")
def rhs_alloc_n2(u, A, G, dxi, c, s, C, deturck, lt, l, lti, li):
    """One-shot right-hand side via the N = 2 fast path."""
    n = u.shape[0]
    a0 = A[:, 0].copy(); a1 = A[:, 1].copy()
    g00 = G[:, 0, 0].copy(); g01 = G[:, 0, 1].copy(); g11 = G[:, 1, 1].copy()
    ue = np.empty(n + 4); a0e = np.empty(n + 4); a1e = np.empty(n + 4)
    g00e = np.empty(n + 4); g01e = np.empty(n + 4); g11e = np.empty(n + 4)
    d0ue = np.empty(n + 4); d0a0e = np.empty(n + 4); d0a1e = np.empty(n + 4)
    flags = np.empty(n, dtype=np.int64)
    du = np.empty(n); dA0 = np.empty(n); dA1 = np.empty(n)
    dG00 = np.empty(n); dG01 = np.empty(n); dG11 = np.empty(n)
    node = _rhs_n2(u, a0, a1, g00, g01, g11, dxi, c, s, C, deturck,
                   lt, l, lti, li,
                   ue, a0e, a1e, g00e, g01e, g11e, d0ue, d0a0e, d0a1e, flags,
                   du, dA0, dA1, dG00, dG01, dG11)
    status = OK if node < 0 else flags[node]
    dA = np.empty((n, 2))
    dG = np.empty((n, 2, 2))
    for m in range(n):
        dA[m, 0] = dA0[m]; dA[m, 1] = dA1[m]
        dG[m, 0, 0] = dG00[m]; dG[m, 0, 1] = dG01[m]
        dG[m, 1, 0] = dG01[m]; dG[m, 1, 1] = dG11[m]
    return status, node, du, dA, dG


@njit(cache=True, error_model="numpy")
def rk4_chunk_n2(u, A, G, dxi, c, s, C, deturck, cfl, lt, l, lti, li,
                 tau0, tau_stop, max_steps, dt_override=0.0):
    """N = 2 specialization of rk4_chunk; same contract, same results."""
    n = u.shape[0]
    a0 = np.empty(n); a1 = np.empty(n)
    g00 = np.empty(n); g01 = np.empty(n); g11 = np.empty(n)
    for m in range(n):
        a0[m] = A[m, 0]; a1[m] = A[m, 1]
        g00[m] = G[m, 0, 0]; g01[m] = G[m, 0, 1]; g11[m] = G[m, 1, 1]
    ue = np.empty(n + 4); a0e = np.empty(n + 4); a1e = np.empty(n + 4)
    g00e = np.empty(n + 4); g01e = np.empty(n + 4); g11e = np.empty(n + 4)
    d0ue = np.empty(n + 4); d0a0e = np.empty(n + 4); d0a1e = np.empty(n + 4)
    flags = np.empty(n, dtype=np.int64)
    ku = np.empty((4, n)); kA0 = np.empty((4, n)); kA1 = np.empty((4, n))
    kG00 = np.empty((4, n)); kG01 = np.empty((4, n)); kG11 = np.empty((4, n))
    su = np.empty(n); sA0 = np.empty(n); sA1 = np.empty(n)
    sG00 = np.empty(n); sG01 = np.empty(n); sG11 = np.empty(n)
    tau = tau0
    steps = 0
    status = OK
    bad = -1
    while tau < tau_stop - 1e-15 and steps < max_steps:
        if dt_override > 0.0:
            dt = dt_override
        else:
            umin = u[0]
            for m in range(1, n):
                if u[m] < umin:
                    umin = u[m]
            if umin <= 0.0:
                status = BAD_U
                bad = 0
                break
            denom = 1.0 / umin
            if deturck and C > denom:
                denom = C
            if denom < 1.0:
                denom = 1.0
            dt = cfl * dxi * dxi / (2.0 * denom)
        if tau + dt > tau_stop:
            dt = tau_stop - tau
        failed = False
        for stage in range(4):
            if stage == 0:
                cu, cA0, cA1, cg00, cg01, cg11 = u, a0, a1, g00, g01, g11
            else:
                h = 0.5 * dt if stage < 3 else dt
                kk = stage - 1
                for m in range(n):
                    su[m] = u[m] + h * ku[kk, m]
                    sA0[m] = a0[m] + h * kA0[kk, m]
                    sA1[m] = a1[m] + h * kA1[kk, m]
                    sG00[m] = g00[m] + h * kG00[kk, m]
                    sG01[m] = g01[m] + h * kG01[kk, m]
                    sG11[m] = g11[m] + h * kG11[kk, m]
                cu, cA0, cA1, cg00, cg01, cg11 = su, sA0, sA1, sG00, sG01, sG11
            node = _rhs_n2(cu, cA0, cA1, cg00, cg01, cg11,
                           dxi, c, s, C, deturck, lt, l, lti, li,
                           ue, a0e, a1e, g00e, g01e, g11e, d0ue, d0a0e, d0a1e, flags,
                           ku[stage], kA0[stage], kA1[stage],
                           kG00[stage], kG01[stage], kG11[stage])
            if node >= 0:
                status = flags[node]
                bad = node
                failed = True
                break
        if failed:
            break
        sixth = dt / 6.0
        for m in range(n):
            u[m] += sixth * (ku[0, m] + 2.0 * (ku[1, m] + ku[2, m]) + ku[3, m])
            a0[m] += sixth * (kA0[0, m] + 2.0 * (kA0[1, m] + kA0[2, m]) + kA0[3, m])
            a1[m] += sixth * (kA1[0, m] + 2.0 * (kA1[1, m] + kA1[2, m]) + kA1[3, m])
            g00[m] += sixth * (kG00[0, m] + 2.0 * (kG00[1, m] + kG00[2, m]) + kG00[3, m])
            g01[m] += sixth * (kG01[0, m] + 2.0 * (kG01[1, m] + kG01[2, m]) + kG01[3, m])
            g11[m] += sixth * (kG11[0, m] + 2.0 * (kG11[1, m] + kG11[2, m]) + kG11[3, m])
        tau += dt
        steps += 1
    for m in range(n):
        A[m, 0] = a0[m]; A[m, 1] = a1[m]
        G[m, 0, 0] = g00[m]; G[m, 0, 1] = g01[m]
        G[m, 1, 0] = g01[m]; G[m, 1, 1] = g11[m]
    return status, bad, tau, steps
