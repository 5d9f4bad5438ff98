import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonon_laser.errors import InvalidInputError
from phonon_laser.qspace import (
    B, M, SPACE, T, CompositeSpace, check_density_matrix, embed, ground_state, kron_all,
    lindblad_apply, partial_trace, projector, random_density_matrix, validate_density_matrix,
)


def test_projector_definition():
    assert np.array_equal(projector(1, 1, 2), np.array([[1, 0], [0, 0]]))


def test_projector_adjoint():
    assert np.array_equal(projector(2, 1, 2).conj().T, projector(1, 2, 2))


def test_projector_action_on_basis_vector():
    e4 = np.zeros(4)
    e4[3] = 1
    e3 = np.zeros(4)
    e3[2] = 1
    assert np.array_equal(projector(3, 4, 4) @ e4, e3)


@pytest.mark.parametrize("i,j", [(0, 1), (3, 1), (1, 5)])
def test_projector_out_of_range(i, j):
    with pytest.raises(InvalidInputError):
        projector(i, j, 2 if j < 5 else 4)


def test_embed_identity():
    assert np.array_equal(embed(np.eye(2), 0), np.eye(16))


def test_embed_trace_multiplicity():
    assert np.trace(embed(projector(2, 2, 4), 1)) == 4


def test_embed_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        embed(np.eye(4), 0)
    with pytest.raises(InvalidInputError):
        embed(np.eye(2), 3)


def test_embed_disjoint_slots_commute(rng):
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    Bm = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    x, y = embed(A, 0), embed(Bm, 2)
    assert np.allclose(x @ y, y @ x, atol=1e-14)


def test_basis_index_order():
    # slot T is the most significant digit
    assert SPACE.basis_index((1, 1, 1)) == 0
    assert SPACE.basis_index((1, 1, 2)) == 1
    assert SPACE.basis_index((1, 2, 1)) == 2
    assert SPACE.basis_index((2, 1, 1)) == 8
    for k in range(16):
        assert SPACE.basis_index(SPACE.levels(k)) == k


def test_space_rejects_bad_dims():
    with pytest.raises(InvalidInputError):
        CompositeSpace((2, 1, 2))


def test_partial_trace_product_state():
    rho = kron_all(projector(1, 1, 2), projector(1, 1, 4), projector(1, 1, 2))
    assert np.array_equal(partial_trace(rho, M), projector(1, 1, 4))


def test_partial_trace_maximally_mixed():
    assert np.allclose(partial_trace(np.eye(16) / 16, T), np.eye(2) / 2)


def _partial_trace_by_indexing(rho, keep):
    dims = SPACE.dims
    out = np.zeros((dims[keep], dims[keep]), dtype=complex)
    for a in range(16):
        la = SPACE.levels(a)
        for b in range(16):
            lb = SPACE.levels(b)
            if all(la[s] == lb[s] for s in range(3) if s != keep):
                out[la[keep] - 1, lb[keep] - 1] += rho[a, b]
    return out


@pytest.mark.parametrize("keep", [T, M, B])
def test_partial_trace_random_state(rng, keep):
    for _ in range(5):
        rho = random_density_matrix(rng)
        red = partial_trace(rho, keep)
        assert np.allclose(red, _partial_trace_by_indexing(rho, keep), atol=1e-14)
        assert abs(np.trace(red) - 1) < 1e-12
        assert np.allclose(red, red.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(red)[0] > -1e-12


def test_partial_trace_of_product_recovers_factors(rng):
    parts = [random_density_matrix(rng, n) for n in SPACE.dims]
    rho = kron_all(*parts)
    for slot, part in enumerate(parts):
        assert np.allclose(partial_trace(rho, slot), part, atol=1e-14)


def test_lindblad_zero_rate():
    rho = ground_state()
    assert not lindblad_apply(rho, embed(projector(2, 1, 2), T), 0.0).any()


def test_lindblad_negative_rate():
    with pytest.raises(InvalidInputError):
        lindblad_apply(ground_state(), np.eye(16), -1.0)


def test_lindblad_unitary_jump(rng):
    H = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    U, _ = np.linalg.qr(H)
    rho = random_density_matrix(rng)
    out = lindblad_apply(rho, U, 0.7)
    assert np.allclose(out, 0.7 * (U @ rho @ U.conj().T - rho), atol=1e-13)
    assert abs(np.trace(out)) < 1e-13


def test_lindblad_pure_excitation():
    L = projector(2, 1, 2)
    out = lindblad_apply(projector(1, 1, 2), L, 1.3)
    assert np.allclose(out, 1.3 * (projector(2, 2, 2) - projector(1, 1, 2)))


def test_density_matrix_checks(rng):
    assert check_density_matrix(ground_state()) is None
    assert check_density_matrix(random_density_matrix(rng, rank=3)) is None
    assert check_density_matrix(2 * ground_state())[0] == "unit-trace"
    bad = ground_state()
    bad[0, 1] = 1e-6
    assert check_density_matrix(bad)[0] == "hermitian"
    neg = np.diag([1.1, -0.1] + [0] * 14).astype(complex)
    assert check_density_matrix(neg)[0] == "positive-semidefinite"
    with pytest.raises(InvalidInputError):
        validate_density_matrix(neg)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 16))
def test_partial_traces_preserve_validity(seed, rank):
    rho = random_density_matrix(np.random.default_rng(seed), rank=rank)
    for slot in (T, M, B):
        red = partial_trace(rho, slot)
        assert abs(np.trace(red) - 1) < 1e-12
        assert np.linalg.eigvalsh(0.5 * (red + red.conj().T))[0] > -1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rate=st.floats(0, 10))
def test_lindblad_is_traceless(seed, rate):
    r = np.random.default_rng(seed)
    L = r.normal(size=(16, 16)) + 1j * r.normal(size=(16, 16))
    out = lindblad_apply(random_density_matrix(r), L, rate)
    assert abs(np.trace(out)) < 1e-10 * max(1.0, rate)
