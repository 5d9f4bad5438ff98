"""Pure numpy reference backend; mirrors ``_core.pyx`` operation for operation."""
import numpy as np


def rhs(rho, B, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
        x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar):
    n = rho.shape[0]
    K = np.zeros((n, n), dtype=complex)
    K[k_rows, k_cols] = k_vals
    dB = np.zeros(2, dtype=complex)
    for m in range(2):
        r = x_rows[x_ptr[m]:x_ptr[m + 1]]
        c = x_cols[x_ptr[m]:x_ptr[m + 1]]
        if drive:
            K[r, c] += hg * np.conj(B[m])
            K[c, r] += hg * B[m]
            coh = rho[c, r].sum()
            dB[m] = -(1j * omega[m] + Gamma) * B[m] - 1j * g * coh
    A = K @ rho
    d = (-1j / hbar) * (A - A.conj().T)
    for k in range(len(j_rate)):
        rate = j_rate[k]
        if rate == 0.0:
            continue
        s = j_src[j_ptr[k]:j_ptr[k + 1]]
        t = j_dst[j_ptr[k]:j_ptr[k + 1]]
        d[np.ix_(t, t)] += rate * rho[np.ix_(s, s)]
    return d, dB


def rk4_advance(rho, B, k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
                x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar, dt, nsteps):
    tables = (k_rows, k_cols, k_vals, j_ptr, j_src, j_dst, j_rate,
              x_ptr, x_rows, x_cols, omega, Gamma, g, hg, drive, hbar)
    rho = np.array(rho, dtype=complex)
    B = np.array(B, dtype=complex)
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for _ in range(nsteps):
        r1, b1 = rhs(rho, B, *tables)
        r2, b2 = rhs(rho + h2 * r1, B + h2 * b1, *tables)
        r3, b3 = rhs(rho + h2 * r2, B + h2 * b2, *tables)
        r4, b4 = rhs(rho + dt * r3, B + dt * b3, *tables)
        rho = rho + h6 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
        B = B + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        rho = 0.5 * (rho + rho.conj().T)
    return rho, B
