"""Physical model of the four-level phonon laser with two filter qubits.

Units: energies in meV, times in ps, rates in 1/ps, temperatures in K,
displacements in pm.
"""
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.special import expit

from .errors import InvalidInputError
from .qspace import SPACE, B, M, T, embed, kron_all, projector

HBAR = 0.6582119569  # meV ps
K_B = 0.08617333  # meV / K

# (lower, upper) middle levels driven by each phonon mode
MODE_TRANSITIONS = {1: (3, 4), 2: (1, 2)}

# middle-system lowering projectors P_ab (a < b) paired with each filter's raising operator
EXCHANGE_TERMS = ((1, 2), (1, 4), (2, 3), (2, 4))

RESONANCE_TOL = 1e-9  # meV


@dataclass(frozen=True)
class ModelParams:
    E_M: tuple = (0.0, 5.0, 30.0, 35.0)
    delta_T: float = 35.0
    delta_B: float = 25.0
    lambda_MT: float = 0.03
    lambda_MB: float = 0.03
    gamma_H: float = 3.0
    gamma_C: float = 3.0
    T_H: float = 400.0
    T_C: float = 100.0
    gamma_sys12: float = 0.0
    gamma_sys34: float = 0.0
    T_sys: float = 300.0
    omega1: float = None
    omega2: float = None
    g: float = 2.25
    Gamma_ph: float = 2.0
    u0: float = 20.0
    B1_init: complex = 1e-3
    B2_init: complex = 1e-3
    resonant_only: bool = False

    def __post_init__(self):
        E = tuple(float(e) for e in self.E_M)
        if len(E) != 4:
            raise InvalidInputError(f"E_M needs four level energies, got {len(E)}")
        object.__setattr__(self, "E_M", E)
        for f in fields(self):
            if f.type is float:
                v = getattr(self, f.name)
                if v is not None:
                    object.__setattr__(self, f.name, float(v))
        object.__setattr__(self, "B1_init", complex(self.B1_init))
        object.__setattr__(self, "B2_init", complex(self.B2_init))
        object.__setattr__(self, "resonant_only", bool(self.resonant_only))
        if self.omega1 is None:
            object.__setattr__(self, "omega1", (E[3] - E[2]) / HBAR)
        if self.omega2 is None:
            object.__setattr__(self, "omega2", (E[1] - E[0]) / HBAR)
        self.validate()

    def validate(self):
        E = self.E_M
        if E[0] != 0.0:
            raise InvalidInputError(f"E_M[0] must be 0 by convention, got {E[0]}")
        if not all(a <= b for a, b in zip(E, E[1:])):
            raise InvalidInputError(f"level energies must be non-decreasing, got {E}")
        for name in ("delta_T", "delta_B", "lambda_MT", "lambda_MB", "gamma_H", "gamma_C",
                     "gamma_sys12", "gamma_sys34", "omega1", "omega2", "g", "Gamma_ph", "u0"):
            v = getattr(self, name)
            if not v >= 0 or math.isnan(v):
                raise InvalidInputError(f"{name} must be >= 0, got {v}")
        for temp, rates in (("T_H", ("gamma_H",)), ("T_C", ("gamma_C",)),
                            ("T_sys", ("gamma_sys12", "gamma_sys34"))):
            v = getattr(self, temp)
            if math.isnan(v) or v < 0:
                raise InvalidInputError(f"{temp} must be >= 0, got {v}")
            if v == 0 and any(getattr(self, r) > 0 for r in rates):
                raise InvalidInputError(f"{temp} must be > 0 while {'/'.join(rates)} is nonzero")
        for name in ("B1_init", "B2_init"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")

    # transition energies of the middle system
    def eps(self, i, j):
        return abs(self.E_M[j - 1] - self.E_M[i - 1])

    def replace(self, **changes):
        """Copy with ``changes``; phonon frequencies are re-derived unless given."""
        if "E_M" in changes:
            changes.setdefault("omega1", None)
            changes.setdefault("omega2", None)
        return replace(self, **changes)

    def to_dict(self):
        d = asdict(self)
        d["E_M"] = list(self.E_M)
        return d


@dataclass(frozen=True)
class Preset:
    name: str
    params: ModelParams
    notes: tuple = field(default=())


PRESETS = {
    "model-section": Preset(
        "model-section",
        ModelParams(
            E_M=(0.0, 5.0, 30.0, 35.0), delta_T=35.0, delta_B=25.0,
            lambda_MT=0.03, lambda_MB=0.03, gamma_H=3.0, gamma_C=3.0,
            T_H=400.0, T_C=100.0, gamma_sys12=0.0, gamma_sys34=0.0, T_sys=300.0,
            g=2.25, Gamma_ph=2.0, u0=20.0,
        ),
        notes=(
            "level energies reconstructed as E=(0,5,30,35) meV so both phonon gaps are 5 meV",
            "delta_T set to eps_14=35 meV (resonant with the 1->4 pump), delta_B=eps_23=25 meV",
            "bath temperatures 400 K / 100 K and T_sys=300 K are not given for this parameter set",
        ),
    ),
    "results-phonon": Preset(
        "results-phonon",
        ModelParams(
            E_M=(0.0, 2.0, 27.0, 29.0), delta_T=29.0, delta_B=25.0,
            lambda_MT=0.08, lambda_MB=0.08, gamma_H=5.0, gamma_C=5.0,
            T_H=400.0, T_C=100.0, gamma_sys12=0.0, gamma_sys34=0.0, T_sys=300.0,
            g=2.25, Gamma_ph=1.0, u0=20.0,
        ),
        notes=(
            "level energies reconstructed as E=(0,2,27,29) meV (eps_14=29, eps_23=25, phonon gaps 2 meV)",
            "T_sys=300 K is a free parameter; internal dissipation is off (gamma_sys=0)",
        ),
    ),
}


def preset(name):
    try:
        return PRESETS[name].params
    except KeyError:
        raise InvalidInputError(f"unknown preset '{name}' (choose from {', '.join(PRESETS)})") from None


def bath_rate(k, delta, T, gamma):
    """Thermal transition rate; k=1 excites, k=2 relaxes.

    gamma / (1 + exp((-1)**(k-1) * delta / (k_B T))). ``T = inf`` gives gamma/2.
    """
    if k not in (1, 2):
        raise InvalidInputError(f"k must be 1 or 2, got {k}")
    if gamma < 0 or delta < 0:
        raise InvalidInputError("gamma and delta must be >= 0")
    if gamma == 0:
        return 0.0
    if not T > 0:
        raise InvalidInputError(f"temperature must be > 0 for a nonzero rate, got {T}")
    x = delta / (K_B * T)
    return float(gamma * expit(-x if k == 1 else x))


def system_energies(p):
    """Diagonal of the bare Hamiltonian, flat index order (t, m, b)."""
    out = np.empty(SPACE.total_dim)
    for idx in range(SPACE.total_dim):
        t, m, b = SPACE.levels(idx)
        out[idx] = p.delta_T * (t == 2) + p.E_M[m - 1] + p.delta_B * (b == 2)
    return out


def build_system_hamiltonian(p):
    return np.diag(system_energies(p)).astype(complex)


@dataclass(frozen=True)
class ExchangeTerm:
    """One filter-middle excitation-exchange term of the interaction Hamiltonian.

    ``side`` is 'H' (top filter, hot) or 'C' (bottom filter, cold); ``lower``,
    ``upper`` are the middle levels it connects (the filter is raised while the
    middle system drops ``upper -> lower``).
    """
    side: str
    lower: int
    upper: int
    operator: np.ndarray = field(repr=False, compare=False)


def is_resonant(p, side, lower, upper):
    delta = p.delta_T if side == "H" else p.delta_B
    return abs(p.eps(lower, upper) - delta) <= RESONANCE_TOL


def interaction_terms(p):
    """All exchange terms (each Hermitian), honoring ``p.resonant_only``."""
    raise_T = projector(2, 1, 2)
    terms = []
    for side, lam in (("H", p.lambda_MT), ("C", p.lambda_MB)):
        for a, b in EXCHANGE_TERMS:
            if p.resonant_only and not is_resonant(p, side, a, b):
                continue
            mid = projector(a, b, 4)
            if side == "H":
                op = kron_all(raise_T, mid, np.eye(2))
            else:
                op = kron_all(np.eye(2), mid, raise_T)
            op = lam * (op + op.conj().T)
            terms.append(ExchangeTerm(side, a, b, op))
    return terms


def build_interaction_hamiltonian(p):
    H = np.zeros((SPACE.total_dim,) * 2, dtype=complex)
    for term in interaction_terms(p):
        H += term.operator
    return H


def mode_lowering(mode):
    """embed(P_{lower,upper}) for the middle transition driven by ``mode``."""
    lo, hi = MODE_TRANSITIONS[mode]
    return embed(projector(lo, hi, 4), M)


def build_drive_hamiltonian(B1, B2, p):
    """Semiclassical carrier-phonon term hbar g (B* P_lo,hi + B P_hi,lo) per mode."""
    H = np.zeros((SPACE.total_dim,) * 2, dtype=complex)
    for mode, amp in ((1, complex(B1)), (2, complex(B2))):
        X = mode_lowering(mode)
        H += HBAR * p.g * (np.conj(amp) * X + amp * X.conj().T)
    return H


@dataclass(frozen=True)
class LindbladChannel:
    operator: np.ndarray = field(repr=False, compare=False)
    rate: float
    tag: str  # HOT, COLD, SYS12, SYS34
    direction: str  # UP, DOWN
    slot: int
    to_level: int
    from_level: int


def build_channels(p):
    """Eight jump channels: hot, cold, internal 1<->2 and internal 3<->4."""
    specs = (
        ("HOT", T, 2, p.delta_T, p.T_H, p.gamma_H),
        ("COLD", B, 2, p.delta_B, p.T_C, p.gamma_C),
        ("SYS12", M, (1, 2), p.eps(1, 2), p.T_sys, p.gamma_sys12),
        ("SYS34", M, (3, 4), p.eps(3, 4), p.T_sys, p.gamma_sys34),
    )
    channels = []
    for tag, slot, pair, delta, temp, gamma in specs:
        lo, hi = (1, 2) if slot != M else pair
        n = SPACE.dims[slot]
        up = bath_rate(1, delta, temp, gamma)
        down = bath_rate(2, delta, temp, gamma)
        channels.append(LindbladChannel(embed(projector(hi, lo, n), slot), up, tag, "UP", slot, hi, lo))
        channels.append(LindbladChannel(embed(projector(lo, hi, n), slot), down, tag, "DOWN", slot, lo, hi))
    return channels


def channel_pairs(p):
    """{tag: (up_rate, down_rate, delta, temperature)} for the four channel pairs."""
    ch = build_channels(p)
    deltas = {"HOT": (p.delta_T, p.T_H), "COLD": (p.delta_B, p.T_C),
              "SYS12": (p.eps(1, 2), p.T_sys), "SYS34": (p.eps(3, 4), p.T_sys)}
    out = {}
    for up, down in zip(ch[::2], ch[1::2]):
        out[up.tag] = (up.rate, down.rate) + deltas[up.tag]
    return out


def params_to_text(p):
    """key = value lines accepted by :func:`params_from_mapping`."""
    lines = []
    for f in fields(p):
        v = getattr(p, f.name)
        if f.name == "E_M":
            lines.append("E_M = " + ", ".join(repr(e) for e in v))
        elif isinstance(v, complex):
            lines.append(f"{f.name} = {v!r}".replace("(", "").replace(")", ""))
        else:
            lines.append(f"{f.name} = {v!r}")
    return "\n".join(lines) + "\n"


PARAM_KEYS = tuple(f.name for f in fields(ModelParams))


def parse_param_value(key, text):
    text = text.strip()
    if key == "E_M":
        return tuple(float(x) for x in text.split(","))
    if key in ("B1_init", "B2_init"):
        return complex(text.replace(" ", ""))
    if key == "resonant_only":
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got '{text}'")
    return float(text)


def params_from_mapping(values, base=None):
    """Build ModelParams from string or typed ``values`` on top of ``base``."""
    base = ModelParams() if base is None else base
    changes = {}
    for key, v in values.items():
        if key not in PARAM_KEYS:
            raise InvalidInputError(f"unknown parameter '{key}'")
        changes[key] = parse_param_value(key, v) if isinstance(v, str) else v
    return base.replace(**changes)
