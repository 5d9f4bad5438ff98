import os
import subprocess
import sys

import numpy as np
import pytest

from phonon_laser import kernels, preset
from phonon_laser.dynamics import SimState, initial_state, simulate
from phonon_laser.kernels import compile_generator, dense_generator_hamiltonian
from phonon_laser.model import build_channels, build_interaction_hamiltonian, build_system_hamiltonian
from phonon_laser.qspace import random_density_matrix

compiled_only = pytest.mark.skipif("compiled" not in kernels.available_backends(),
                                   reason="compiled extension not built")


@pytest.fixture
def python_backend():
    previous = kernels.BACKEND
    kernels.use_backend("python")
    yield
    kernels.use_backend(previous)


def test_generator_hamiltonian_reassembles(preset_params):
    p = preset_params.replace(gamma_sys12=0.1, gamma_sys34=0.1)
    K = dense_generator_hamiltonian(compile_generator(p))
    anti = sum(c.rate * c.operator.conj().T @ c.operator for c in build_channels(p))
    expect = build_system_hamiltonian(p) + build_interaction_hamiltonian(p) - 0.5j * 0.6582119569 * anti
    assert np.max(np.abs(K - expect)) < 1e-14


@compiled_only
@pytest.mark.parametrize("name", ["model-section", "results-phonon"])
def test_rhs_parity(name, rng):
    p = preset(name).replace(gamma_sys12=0.2, gamma_sys34=0.1)
    tables = compile_generator(p).tables()
    for _ in range(20):
        rho = random_density_matrix(rng)
        B = rng.normal(size=2) + 1j * rng.normal(size=2)
        d_c, b_c = kernels.get_backend("compiled").rhs(rho, B, *tables)
        d_p, b_p = kernels.get_backend("python").rhs(rho, B, *tables)
        assert np.max(np.abs(d_c - d_p)) < 1e-13
        assert np.max(np.abs(b_c - b_p)) < 1e-13


@compiled_only
def test_rk4_parity(rng):
    p = preset("results-phonon").replace(B1_init=0.05, B2_init=0.02)
    s = initial_state(p, random_density_matrix(rng))
    tables = compile_generator(p).tables()
    out = [kernels.get_backend(n).rk4_advance(s.rho, s.B, *tables, 0.001, 2000) for n in ("compiled", "python")]
    assert np.max(np.abs(out[0][0] - out[1][0])) < 1e-12
    assert np.max(np.abs(out[0][1] - out[1][1])) < 1e-12


def test_python_backend_trajectory(python_backend):
    assert kernels.BACKEND == "python"
    tr = simulate(preset("model-section"), 0.5, sample_every=100)
    assert tr.max_trace_error < 1e-12


@compiled_only
def test_backends_agree_on_trajectory(python_backend):
    p = preset("results-phonon")
    slow = simulate(p, 1.0, sample_every=250)
    kernels.use_backend("compiled")
    fast = simulate(p, 1.0, sample_every=250)
    assert np.max(np.abs(fast.rho - slow.rho)) < 1e-12
    assert np.max(np.abs(fast.B - slow.B)) < 1e-12


@pytest.mark.parametrize("name", kernels.available_backends())
def test_zero_coupling_matches_drive_off_bitwise(name):
    """g = 0 with the drive on leaves rho bit-identical to the drive-free (frozen-amplitude) run."""
    p = preset("results-phonon").replace(g=0.0)
    be = kernels.get_backend(name)
    s = SimState(random_density_matrix(np.random.default_rng(5)), 0.3 - 0.1j, 0.2)
    on = be.rk4_advance(s.rho, s.B, *compile_generator(p, True).tables(), 0.001, 300)
    off = be.rk4_advance(s.rho, s.B, *compile_generator(p, False).tables(), 0.001, 300)
    assert np.array_equal(on[0], off[0])
    assert np.array_equal(off[1], s.B)
    assert np.allclose(np.abs(on[1]), np.abs(s.B) * np.exp(-p.Gamma_ph * 0.3), rtol=1e-10)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, PHONON_LASER_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import phonon_laser; print(phonon_laser.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
