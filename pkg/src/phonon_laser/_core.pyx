# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled right-hand side and RK4 loop for the coupled density-matrix /
phonon-amplitude system. Same signatures as ``_core_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx
ctypedef Py_ssize_t idx_t


cdef extern from "complex.h" nogil:
    double complex conj(double complex)


cdef void _rhs(cplx[:, ::1] rho, cplx[::1] B, cplx[:, ::1] A, cplx[:, ::1] d, cplx[::1] dB,
               idx_t[::1] k_rows, idx_t[::1] k_cols, cplx[::1] k_vals,
               idx_t[::1] j_ptr, idx_t[::1] j_src, idx_t[::1] j_dst, double[::1] j_rate,
               idx_t[::1] x_ptr, idx_t[::1] x_rows, idx_t[::1] x_cols,
               double[::1] omega, double Gamma, double g, double hg, int drive,
               double hbar) noexcept nogil:
    cdef idx_t n = rho.shape[0]
    cdef idx_t i, j, k, p, q, r, c, s, t
    cdef cplx v, coh, vb, vbc
    cdef double rate
    cdef cplx mi_hbar = -1j / hbar

    for i in range(n):
        for j in range(n):
            A[i, j] = 0
    # A = K rho
    for k in range(k_vals.shape[0]):
        r = k_rows[k]
        c = k_cols[k]
        v = k_vals[k]
        for j in range(n):
            A[r, j] = A[r, j] + v * rho[c, j]
    for k in range(2):
        dB[k] = 0
    if drive:
        for k in range(2):
            vbc = hg * conj(B[k])
            vb = hg * B[k]
            coh = 0
            for p in range(x_ptr[k], x_ptr[k + 1]):
                r = x_rows[p]
                c = x_cols[p]
                for j in range(n):
                    A[r, j] = A[r, j] + vbc * rho[c, j]
                    A[c, j] = A[c, j] + vb * rho[r, j]
                coh = coh + rho[c, r]
            dB[k] = -(1j * omega[k] + Gamma) * B[k] - 1j * g * coh
    # d = -(i/hbar) (K rho - rho K^dag), rho Hermitian
    for i in range(n):
        for j in range(n):
            d[i, j] = mi_hbar * (A[i, j] - conj(A[j, i]))
    for k in range(j_rate.shape[0]):
        rate = j_rate[k]
        if rate == 0.0:
            continue
        for p in range(j_ptr[k], j_ptr[k + 1]):
            s = j_src[p]
            t = j_dst[p]
            for q in range(j_ptr[k], j_ptr[k + 1]):
                d[t, j_dst[q]] = d[t, j_dst[q]] + rate * rho[s, j_src[q]]


def rhs(rho, B, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
        x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar):
    cdef cplx[:, ::1] r = np.ascontiguousarray(rho, dtype=complex)
    cdef cplx[::1] b = np.ascontiguousarray(B, dtype=complex)
    n = r.shape[0]
    d = np.empty((n, n), dtype=complex)
    A = np.empty((n, n), dtype=complex)
    dB = np.empty(2, dtype=complex)
    _rhs(r, b, A, d, dB, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
         x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar)
    return d, dB


def rk4_advance(rho, B, idx_t[::1] k_rows, idx_t[::1] k_cols, cplx[::1] k_vals,
                idx_t[::1] j_ptr, idx_t[::1] j_src, idx_t[::1] j_dst, double[::1] j_rate,
                idx_t[::1] x_ptr, idx_t[::1] x_rows, idx_t[::1] x_cols,
                double[::1] omega, double Gamma, double g, double hg, int drive,
                double hbar, double dt, long nsteps):
    rho_out = np.array(rho, dtype=complex, order="C", copy=True)
    B_out = np.array(B, dtype=complex, copy=True)
    cdef cplx[:, ::1] y = rho_out
    cdef cplx[::1] yb = B_out
    cdef idx_t n = y.shape[0]
    cdef cplx[:, ::1] A = np.empty((n, n), dtype=complex)
    cdef cplx[:, ::1] tmp = np.empty((n, n), dtype=complex)
    cdef cplx[:, ::1] k1 = np.empty((n, n), dtype=complex)
    cdef cplx[:, ::1] k2 = np.empty((n, n), dtype=complex)
    cdef cplx[:, ::1] k3 = np.empty((n, n), dtype=complex)
    cdef cplx[:, ::1] k4 = np.empty((n, n), dtype=complex)
    cdef cplx[::1] tb = np.empty(2, dtype=complex)
    cdef cplx[::1] b1 = np.empty(2, dtype=complex)
    cdef cplx[::1] b2 = np.empty(2, dtype=complex)
    cdef cplx[::1] b3 = np.empty(2, dtype=complex)
    cdef cplx[::1] b4 = np.empty(2, dtype=complex)
    cdef double h2 = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef long step
    cdef idx_t i, j
    cdef cplx a, bb
    with nogil:
        for step in range(nsteps):
            _rhs(y, yb, A, k1, b1, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
                 x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = y[i, j] + h2 * k1[i, j]
            for i in range(2):
                tb[i] = yb[i] + h2 * b1[i]
            _rhs(tmp, tb, A, k2, b2, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
                 x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = y[i, j] + h2 * k2[i, j]
            for i in range(2):
                tb[i] = yb[i] + h2 * b2[i]
            _rhs(tmp, tb, A, k3, b3, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
                 x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = y[i, j] + dt * k3[i, j]
            for i in range(2):
                tb[i] = yb[i] + dt * b3[i]
            _rhs(tmp, tb, A, k4, b4, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
                 x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar)
            for i in range(n):
                for j in range(n):
                    y[i, j] = y[i, j] + h6 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            for i in range(2):
                yb[i] = yb[i] + h6 * (b1[i] + 2.0 * b2[i] + 2.0 * b3[i] + b4[i])
            # Hermitize
            for i in range(n):
                y[i, i] = y[i, i].real
                for j in range(i + 1, n):
                    a = 0.5 * (y[i, j] + conj(y[j, i]))
                    y[i, j] = a
                    y[j, i] = conj(a)
    return rho_out, B_out
