"""Operator algebra on the T (2) x M (4) x B (2) tensor-product space.

All matrices are dense ``complex128`` arrays. Level indices in the public API
are 1-based; subsystem slots are 0-based in the order (T, M, B).
"""
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import InvalidInputError

TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = -1e-8

T, M, B = 0, 1, 2


@dataclass(frozen=True)
class CompositeSpace:
    dims: tuple = (2, 4, 2)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise InvalidInputError(f"subsystem dimensions must all be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self):
        return int(np.prod(self.dims))

    def basis_index(self, levels):
        """Flat index of the product basis state with 1-based ``levels``."""
        if len(levels) != len(self.dims):
            raise InvalidInputError("one level per subsystem is required")
        idx = 0
        for lvl, d in zip(levels, self.dims):
            if not 1 <= lvl <= d:
                raise InvalidInputError(f"level {lvl} out of range 1..{d}")
            idx = idx * d + (lvl - 1)
        return idx

    def levels(self, index):
        """Inverse of :meth:`basis_index`."""
        out = []
        for d in reversed(self.dims):
            index, r = divmod(index, d)
            out.append(r + 1)
        return tuple(reversed(out))


SPACE = CompositeSpace()


def projector(i, j, n):
    """|i><j| on an ``n``-level subsystem (1-based indices)."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise InvalidInputError(f"projector indices ({i}, {j}) out of range 1..{n}")
    P = np.zeros((n, n), dtype=complex)
    P[i - 1, j - 1] = 1.0
    return P


def embed(op, slot, space=SPACE):
    """Place a single-subsystem operator at ``slot``; identity elsewhere."""
    op = np.asarray(op, dtype=complex)
    if not 0 <= slot < len(space.dims):
        raise InvalidInputError(f"slot {slot} out of range for dims {space.dims}")
    if op.shape != (space.dims[slot],) * 2:
        raise InvalidInputError(
            f"operator shape {op.shape} does not match subsystem dimension {space.dims[slot]}")
    factors = [np.eye(d, dtype=complex) for d in space.dims]
    factors[slot] = op
    return reduce(np.kron, factors)


def kron_all(*ops):
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def partial_trace(rho, keep, space=SPACE):
    """Reduced matrix of subsystem ``keep`` (all other factors traced out)."""
    rho = np.asarray(rho)
    n = space.total_dim
    if rho.shape != (n, n):
        raise InvalidInputError(f"expected a {n}x{n} matrix, got {rho.shape}")
    if not 0 <= keep < len(space.dims):
        raise InvalidInputError(f"slot {keep} out of range for dims {space.dims}")
    k = len(space.dims)
    t = rho.reshape(space.dims + space.dims)
    # bring (keep, keep') to the front, then trace the remaining pairs
    order = [keep, keep + k] + [a for a in range(k) if a != keep] + [a + k for a in range(k) if a != keep]
    t = t.transpose(order)
    d = space.dims[keep]
    rest = n // d
    return np.trace(t.reshape(d, d, rest, rest), axis1=2, axis2=3)


def lindblad_apply(rho, L, rate):
    """rate * (L rho L^dag - 1/2 {L^dag L, rho})."""
    if rate < 0:
        raise InvalidInputError(f"dissipation rate must be >= 0, got {rate}")
    if rate == 0:
        return np.zeros_like(rho, dtype=complex)
    Ld = L.conj().T
    LdL = Ld @ L
    return rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))


def hermiticity_error(rho):
    return float(np.max(np.abs(rho - rho.conj().T)))


def check_density_matrix(rho, space=SPACE):
    """Return ``(name, value)`` of the first violated invariant, or None."""
    n = space.total_dim
    if rho.shape != (n, n):
        return ("shape", float("nan"))
    if not np.all(np.isfinite(rho)):
        return ("finite", float("nan"))
    herm = hermiticity_error(rho)
    if herm > HERMITIAN_TOL:
        return ("hermitian", herm)
    tr = abs(np.trace(rho) - 1.0)
    if tr > TRACE_TOL:
        return ("unit-trace", tr)
    lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lam < POSITIVITY_TOL:
        return ("positive-semidefinite", lam)
    return None


def validate_density_matrix(rho, space=SPACE):
    bad = check_density_matrix(rho, space)
    if bad is not None:
        raise InvalidInputError(f"not a valid density matrix: {bad[0]} (value {bad[1]:.3e})")
    return rho


def ground_state(space=SPACE):
    rho = np.zeros((space.total_dim,) * 2, dtype=complex)
    rho[0, 0] = 1.0
    return rho


def random_density_matrix(rng, n=16, rank=None):
    """A * A^dag / Tr(A * A^dag) with complex Gaussian A."""
    rank = n if rank is None else rank
    A = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real
