"""Time evolution of the density matrix and the two phonon amplitudes.

The density matrix follows the Lindblad master equation with the
semiclassical drive hbar g (B* P_lo,hi + B P_hi,lo); each amplitude obeys

    dB_m/dt = -(i omega_m + Gamma) B_m - i g <P_lo,hi>

Integration is classical fixed-step RK4 on (rho, B1, B2) jointly, with the
drive rebuilt from the stage-local amplitudes and rho Hermitized after each
step.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInputError, InvariantViolation
from .qspace import check_density_matrix, ground_state

DEFAULT_DT = 0.001  # ps


@dataclass(frozen=True)
class SimState:
    rho: np.ndarray = field(repr=False)
    B1: complex = 1e-3
    B2: complex = 1e-3
    t: float = 0.0

    @property
    def B(self):
        return np.array([self.B1, self.B2], dtype=complex)

    def displacement(self, mode, u0):
        """Lattice displacement u_m = u0 (B_m + B_m^*) in pm."""
        amp = self.B1 if mode == 1 else self.B2
        return 2.0 * u0 * amp.real


def initial_state(p, rho0=None):
    rho = ground_state() if rho0 is None else np.array(rho0, dtype=complex)
    return SimState(rho, p.B1_init, p.B2_init, 0.0)


def _gen(p, drive=True):
    return kernels.compile_generator(p, drive)


def master_rhs(state, p, drive=True):
    """d rho / dt in 1/ps (``state.rho`` must be Hermitian)."""
    d, _ = kernels.backend.rhs(state.rho, state.B, *_gen(p, drive).tables())
    return d


def amplitude_rhs(state, p):
    """(dB1/dt, dB2/dt) in 1/ps."""
    _, dB = kernels.backend.rhs(state.rho, state.B, *_gen(p).tables())
    return complex(dB[0]), complex(dB[1])


def rk4_step(state, dt, p, drive=True):
    if not dt > 0:
        raise InvalidInputError(f"dt must be > 0, got {dt}")
    rho, B = kernels.backend.rk4_advance(state.rho, state.B, *_gen(p, drive).tables(), float(dt), 1)
    return SimState(rho, complex(B[0]), complex(B[1]), state.t + dt)


def advance(state, dt, nsteps, p, drive=True):
    """``nsteps`` RK4 steps in one backend call."""
    rho, B = kernels.backend.rk4_advance(state.rho, state.B, *_gen(p, drive).tables(),
                                         float(dt), int(nsteps))
    return SimState(rho, complex(B[0]), complex(B[1]), state.t + nsteps * dt)


@dataclass
class Trajectory:
    t: np.ndarray
    B: np.ndarray
    rho: np.ndarray = field(default=None, repr=False)
    occupations: dict = field(default=None, repr=False)
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = 1.0

    def __len__(self):
        return len(self.t)

    def state(self, i):
        if self.rho is None:
            raise ValueError("trajectory was recorded without density matrices")
        return SimState(self.rho[i], complex(self.B[i, 0]), complex(self.B[i, 1]), float(self.t[i]))


def iter_simulation(p, t_end, dt=DEFAULT_DT, sample_every=100, state=None, drive=True, check=True):
    """Yield the initial state and then every ``sample_every``-th step up to ``t_end``.

    A final partial block is sampled so the last emitted time is ``nsteps * dt``
    with ``nsteps = round(t_end / dt)``. Raises InvariantViolation at the first
    bad sample when ``check`` is set.
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be > 0, got {dt}")
    if not t_end >= 0 or not math.isfinite(t_end):
        raise InvalidInputError(f"t_end must be finite and >= 0, got {t_end}")
    if int(sample_every) < 1:
        raise InvalidInputError("sample_every must be >= 1")
    state = initial_state(p) if state is None else state
    nsteps = int(round(t_end / dt))
    tables = _gen(p, drive).tables()
    step = 0
    t0 = state.t
    _check(state, check)
    yield state
    rho, B = state.rho, state.B
    while step < nsteps:
        block = min(int(sample_every), nsteps - step)
        rho, B = kernels.backend.rk4_advance(rho, B, *tables, float(dt), block)
        step += block
        state = SimState(rho, complex(B[0]), complex(B[1]), t0 + step * dt)
        _check(state, check)
        yield state


def _check(state, check):
    if not check:
        return
    if not (np.isfinite(state.B1) and np.isfinite(state.B2)):
        raise InvariantViolation("finite-amplitudes", state.t, float("nan"))
    bad = check_density_matrix(state.rho)
    if bad is not None:
        raise InvariantViolation(bad[0], state.t, bad[1])


def simulate(p, t_end, dt=DEFAULT_DT, sample_every=100, state=None, drive=True, keep_rho=True):
    """Integrate from the ground state (or ``state``) and collect a Trajectory."""
    from .analysis import occupations

    times, amps, rhos = [], [], []
    occ = {"T": [], "M": [], "B": []}
    tr_err = herm_err = 0.0
    min_eig = np.inf
    for s in iter_simulation(p, t_end, dt, sample_every, state, drive):
        times.append(s.t)
        amps.append(s.B)
        if keep_rho:
            rhos.append(s.rho)
        for key, vals in occupations(s.rho).items():
            occ[key].append(vals)
        tr_err = max(tr_err, abs(np.trace(s.rho) - 1.0))
        herm_err = max(herm_err, float(np.max(np.abs(s.rho - s.rho.conj().T))))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(s.rho)[0]))
    return Trajectory(
        np.array(times), np.array(amps), np.array(rhos) if keep_rho else None,
        {k: np.array(v) for k, v in occ.items()}, tr_err, herm_err, min_eig,
    )
