"""Sparse generator tables and the RK4 backend selected at import.

The compiled extension ``_core`` is used when it imports; otherwise the
numpy implementation in ``_core_py`` takes over. Both expose

    rhs(rho, B, *tables) -> (drho, dB)
    rk4_advance(rho, B, *tables, dt, nsteps) -> (rho, B)

with ``tables`` produced by :meth:`Generator.tables`. Setting
``PHONON_LASER_BACKEND=python`` forces the fallback at import. The right-hand side
assumes a Hermitian ``rho`` (it evaluates rho K^dag as (K rho)^dag).
"""
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _core_py
from .model import HBAR, build_channels, build_interaction_hamiltonian, build_system_hamiltonian, mode_lowering
from .qspace import SPACE

if os.environ.get("PHONON_LASER_BACKEND", "").lower() == "python":
    _compiled = None
else:
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        _compiled = None

_BACKENDS = {"python": _core_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

backend = _compiled if _compiled is not None else _core_py
BACKEND = "compiled" if _compiled is not None else "python"


def available_backends():
    return tuple(_BACKENDS)


def use_backend(name):
    """Switch the module-level backend ('compiled' or 'python')."""
    global backend, BACKEND
    try:
        backend = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend '{name}' unavailable; have {available_backends()}") from None
    BACKEND = name
    return backend


def get_backend(name=None):
    return backend if name is None else _BACKENDS[name]


@dataclass(frozen=True, eq=False)
class Generator:
    """Master-equation generator in sparse form.

    K = H_sys + H_int - (i hbar / 2) sum_k r_k L_k^dag L_k  (COO, static)
    Jumps L_k = |dst><src| index maps with rate r_k (CSR over channels).
    Drive mode m: hbar g (B_m^* X_m + B_m X_m^dag), X_m given by its nonzeros.
    """
    k_rows: np.ndarray
    k_cols: np.ndarray
    k_vals: np.ndarray
    j_ptr: np.ndarray
    j_src: np.ndarray
    j_dst: np.ndarray
    j_rate: np.ndarray
    x_ptr: np.ndarray
    x_rows: np.ndarray
    x_cols: np.ndarray
    omega: np.ndarray
    Gamma: float
    g: float
    drive: bool

    def tables(self):
        hg = HBAR * self.g if self.drive else 0.0
        return (self.k_rows, self.k_cols, self.k_vals, self.j_ptr, self.j_src, self.j_dst,
                self.j_rate, self.x_ptr, self.x_rows, self.x_cols, self.omega,
                float(self.Gamma), float(self.g), float(hg), int(self.drive), HBAR)


def _coo(mat, tol=0.0):
    rows, cols = np.nonzero(np.abs(mat) > tol)
    return rows.astype(np.intp), cols.astype(np.intp), mat[rows, cols].astype(complex)


@lru_cache(maxsize=64)
def compile_generator(p, drive=True):
    """Tables for ``p``; ``drive=False`` removes the phonon amplitudes entirely."""
    channels = build_channels(p)
    K = build_system_hamiltonian(p) + build_interaction_hamiltonian(p)
    ptr, src, dst, rates = [0], [], [], []
    for ch in channels:
        LdL = ch.operator.conj().T @ ch.operator
        K = K - 0.5j * HBAR * ch.rate * LdL
        cols = np.nonzero(ch.operator)
        src.extend(cols[1])
        dst.extend(cols[0])
        ptr.append(len(src))
        rates.append(ch.rate)
    k_rows, k_cols, k_vals = _coo(K)
    x_ptr, x_rows, x_cols = [0], [], []
    for mode in (1, 2):
        r, c = np.nonzero(mode_lowering(mode))
        x_rows.extend(r)
        x_cols.extend(c)
        x_ptr.append(len(x_rows))
    ints = lambda a: np.ascontiguousarray(a, dtype=np.intp)
    return Generator(
        k_rows, k_cols, np.ascontiguousarray(k_vals),
        ints(ptr), ints(src), ints(dst), np.asarray(rates, dtype=float),
        ints(x_ptr), ints(x_rows), ints(x_cols),
        np.array([p.omega1, p.omega2], dtype=float), p.Gamma_ph, p.g, bool(drive),
    )


def dense_generator_hamiltonian(gen):
    """Dense K (for tests)."""
    K = np.zeros((SPACE.total_dim,) * 2, dtype=complex)
    K[gen.k_rows, gen.k_cols] = gen.k_vals
    return K
