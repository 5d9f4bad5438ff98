"""Liouvillian superoperator at frozen phonon amplitudes and its steady state.

Vectorization is column stacking, vec(A X B) = (B^T kron A) vec(X), so a
density matrix maps to ``rho.reshape(-1, order="F")``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, null_space

from .errors import SolverError
from .model import HBAR, build_channels, build_drive_hamiltonian, build_interaction_hamiltonian, build_system_hamiltonian
from .qspace import ground_state

RESIDUAL_TOL = 1e-10
RELATION_TOL = 1e-8


def vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, n=16):
    return np.asarray(v).reshape(n, n, order="F")


def hamiltonian_superop(H):
    I = np.eye(H.shape[0])
    return (-1j / HBAR) * (np.kron(I, H) - np.kron(H.T, I))


def dissipator_superop(L, rate):
    I = np.eye(L.shape[0])
    LdL = L.conj().T @ L
    return rate * (np.kron(L.conj(), L) - 0.5 * np.kron(I, LdL) - 0.5 * np.kron(LdL.T, I))


@dataclass(frozen=True)
class Liouvillian:
    matrix: np.ndarray = field(repr=False)
    B1: complex = 0j
    B2: complex = 0j
    rates: tuple = ()

    def apply(self, rho):
        return unvec(self.matrix @ vec(rho), int(np.sqrt(self.matrix.shape[0])))

    def propagate(self, rho, t):
        """exp(L t) acting on ``rho`` (dense matrix exponential)."""
        return unvec(expm(self.matrix * t) @ vec(rho))


def build_liouvillian(p, B1=0j, B2=0j):
    H = build_system_hamiltonian(p) + build_interaction_hamiltonian(p) + build_drive_hamiltonian(B1, B2, p)
    L = hamiltonian_superop(H)
    rates = []
    for ch in build_channels(p):
        if ch.rate > 0:
            L = L + dissipator_superop(ch.operator, ch.rate)
            rates.append(ch.rate)
    return Liouvillian(L, complex(B1), complex(B2), tuple(rates))


@dataclass(frozen=True)
class SteadyState:
    rho_ss: np.ndarray = field(repr=False)
    residual: float
    uniform_current: float = float("nan")
    null_dim: int = 1
    smallest_singular_value: float = 0.0
    B1: complex = 0j
    B2: complex = 0j


def _null_bases(L, tol):
    """Right and left null spaces of L (relative singular-value cutoff ``tol``)."""
    s = np.linalg.svd(L, compute_uv=False)
    return null_space(L, rcond=tol), null_space(L.conj().T, rcond=tol), s


def _refine(L, v, iters=2):
    """Iterative refinement of L x = 0, Tr x = 1 with residuals in extended precision."""
    n = int(np.sqrt(L.shape[0]))
    A = np.vstack([L, vec(np.eye(n))[None, :]])
    b = np.zeros(A.shape[0], dtype=complex)
    b[-1] = 1.0
    A_ext = A.astype(np.clongdouble)
    for _ in range(iters):
        r = (b.astype(np.clongdouble) - A_ext @ v.astype(np.clongdouble)).astype(complex)
        v = v + np.linalg.lstsq(A, r, rcond=None)[0]
    return v


def steady_state(liou, rho0=None, tol=1e-10):
    """Trace-normalized stationary state of ``liou``.

    A degenerate null space is resolved by the exact infinite-time limit from
    ``rho0`` (ground state by default): rho_inf = R (W^H R)^-1 W^H vec(rho0)
    with R, W the right and left null bases. A unique null vector is polished
    by iterative refinement, which matters for small currents computed as
    differences of O(1) populations.
    """
    L = liou.matrix
    n = int(np.sqrt(L.shape[0]))
    right, left, s = _null_bases(L, tol)
    smin = float(s[-1])
    k = right.shape[1]
    if k == 0:
        raise SolverError(f"Liouvillian has no null space (smallest singular value {smin:.3e})", smin)
    if k == 1:
        v = right[:, 0]
    else:
        if left.shape[1] != k:
            raise SolverError(f"left/right null dimensions differ ({left.shape[1]} vs {k})", smin)
        start = vec(ground_state() if rho0 is None else rho0)
        coeffs = np.linalg.solve(left.conj().T @ right, left.conj().T @ start)
        v = right @ coeffs
    tr = np.trace(unvec(v, n))
    if abs(tr) < 1e-14:
        raise SolverError("null vector has vanishing trace", smin)
    v = v / tr
    if k == 1:
        v = _refine(L, v)
    rho = unvec(v, n)
    rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.max(np.abs(L @ vec(rho))))
    if residual > RESIDUAL_TOL:
        raise SolverError(f"steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL:g}", smin)
    return SteadyState(rho, residual, null_dim=k, smallest_singular_value=smin, B1=liou.B1, B2=liou.B2)


def solve(p, B1=0j, B2=0j, rho0=None):
    """Steady state of ``p`` at frozen amplitudes, with the uniform current filled in."""
    from .analysis import flow_decomposition
    from .dynamics import SimState

    ss = steady_state(build_liouvillian(p, B1, B2), rho0)
    rep = flow_decomposition(SimState(ss.rho_ss, complex(B1), complex(B2)), p)
    return SteadyState(ss.rho_ss, ss.residual, rep.J_uniform, ss.null_dim, ss.smallest_singular_value,
                       ss.B1, ss.B2)


def lasing_fixed_point(p, B_start=(1e-3, 1e-3), mixing=0.5, max_iter=500, tol=1e-10):
    """Jointly stationary (rho, B1, B2) by damped iteration of B_m = -i g c_m / (i omega_m + Gamma).

    Uses the frozen-amplitude Liouvillian at each iterate. Raises SolverError
    when the iteration does not settle within ``max_iter``.
    """
    from .model import mode_lowering

    B = np.array(B_start, dtype=complex)
    omega = np.array([p.omega1, p.omega2])
    X = [mode_lowering(1), mode_lowering(2)]
    for it in range(max_iter):
        ss = steady_state(build_liouvillian(p, B[0], B[1]))
        c = np.array([np.trace(ss.rho_ss @ X[0]), np.trace(ss.rho_ss @ X[1])])
        target = -1j * p.g * c / (1j * omega + p.Gamma_ph)
        if np.max(np.abs(target - B)) <= tol:
            return ss, target
        B = (1 - mixing) * B + mixing * target
    raise SolverError(f"amplitude fixed point did not converge in {max_iter} iterations")


@dataclass
class RelationCheck:
    name: str
    values: tuple
    residual: float

    @property
    def ok(self):
        return self.residual <= RELATION_TOL


@dataclass
class RelationReport:
    relations: list
    balances: list
    J: float

    @property
    def passed(self):
        return all(r.ok for r in self.relations)

    def max_residual(self):
        return max(r.residual for r in self.relations)


def _rel(name, *values):
    values = tuple(float(v) for v in values)
    return RelationCheck(name, values, max(values) - min(values))


def verify_current_relations(ss, p):
    """Check the resonant steady-state chain and the exact per-level balances.

    ``relations`` holds the five resonant-chain identities (pass/fail at
    RELATION_TOL); ``balances`` holds the exact steady-state balances, which
    include the non-resonant exchange currents. Never raises.
    """
    from .analysis import flow_decomposition
    from .dynamics import SimState

    r = flow_decomposition(SimState(ss.rho_ss, ss.B1, ss.B2), p)
    H, C = r.J_H_map, r.J_C_map
    D21 = -r.J_D_12
    D43 = -r.J_D_34
    relations = [
        _rel("J_L = -J_H^M = J_H,1->4", r.J_L_12, -r.J_H_M, H["1->4"]),
        _rel("J_R = -J_C^M = -J_C,3->2", r.J_R_12, -r.J_C_M, -C["3->2"]),
        _rel("J_Ph,2->1 + J_D,2->1 = J_C,3->2", r.J_Ph_21 + D21, C["3->2"]),
        _rel("J_C,3->2 = J_Ph,4->3 + J_D,4->3", C["3->2"], r.J_Ph_43 + D43),
        _rel("J_Ph,4->3 + J_D,4->3 = J_H,1->4", r.J_Ph_43 + D43, H["1->4"]),
    ]
    tot = r.transition_totals()
    balances = [
        _rel("J_L = -J_H^M", r.J_L_12, -r.J_H_M),
        _rel("J_R = -J_C^M", r.J_R_12, -r.J_C_M),
        _rel("J_3->2 + J_4->2 = J_2->1", tot["3->2"] + tot["4->2"], tot["2->1"]),
        _rel("J_4->3 = J_3->2", tot["4->3"], tot["3->2"]),
        _rel("J_1->4 = J_4->3 + J_4->2", tot["1->4"], tot["4->3"] + tot["4->2"]),
    ]
    return RelationReport(relations, balances, r.J_uniform)
