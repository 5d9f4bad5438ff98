"""Observables, particle-current bookkeeping and thermodynamics.

Sign conventions
----------------
* ``J_X_map["i->j"]`` is the flux of middle-system population from level i to
  level j caused by generator term X, positive in the written direction.
* ``J_L_12`` / ``J_R_12`` are bath currents, positive when the bath excites
  its filter (Gamma_1 rho_11 - Gamma_2 rho_22).
* ``J_D_12`` / ``J_D_34`` keep the same form for the internal dissipator, so
  the flux 2->1 through it is ``-J_D_12`` and 4->3 is ``-J_D_34``.
* Heats: Qdot_H is absorbed from the hot bath; Qdot_C, Qdot_D12, Qdot_D34 are
  released into the cold bath and the internal reservoir.
"""
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError
from .model import HBAR, MODE_TRANSITIONS, bath_rate, build_channels, interaction_terms, mode_lowering
from .qspace import M, B as SLOT_B, T as SLOT_T, partial_trace

QH_EPS = 1e-13  # meV/ps; below this the efficiencies are undefined

TRANSITIONS = ("1->4", "4->3", "3->2", "2->1", "4->2")
_EXCHANGE_KEY = {(1, 2): "2->1", (1, 4): "1->4", (2, 3): "3->2", (2, 4): "4->2"}


def occupations(rho):
    """Diagonal of each reduced density matrix, keyed 'T', 'M', 'B'."""
    return {name: np.real(np.diag(partial_trace(rho, slot)))
            for name, slot in (("T", SLOT_T), ("M", M), ("B", SLOT_B))}


def total_inversion(rho):
    m = np.real(np.diag(partial_trace(rho, M)))
    return float((m[1] - m[0]) + (m[3] - m[2]))


def bath_current(rho, which, p):
    """Gamma_1 rho_11 - Gamma_2 rho_22 of the top ('L') or bottom ('R') filter."""
    if which == "L":
        slot, delta, temp, gamma = SLOT_T, p.delta_T, p.T_H, p.gamma_H
    elif which == "R":
        slot, delta, temp, gamma = SLOT_B, p.delta_B, p.T_C, p.gamma_C
    else:
        raise InvalidInputError(f"which must be 'L' or 'R', got {which!r}")
    occ = np.real(np.diag(partial_trace(rho, slot)))
    return bath_rate(1, delta, temp, gamma) * occ[0] - bath_rate(2, delta, temp, gamma) * occ[1]


def dissipation_current(rho, pair, p):
    """Internal-dissipator current 1->2 (pair 12) or 3->4 (pair 34)."""
    if pair in (12, "12"):
        lo, hi, gamma = 1, 2, p.gamma_sys12
    elif pair in (34, "34"):
        lo, hi, gamma = 3, 4, p.gamma_sys34
    else:
        raise InvalidInputError(f"pair must be 12 or 34, got {pair!r}")
    if gamma == 0:
        return 0.0
    occ = np.real(np.diag(partial_trace(rho, M)))
    delta = p.eps(lo, hi)
    return bath_rate(1, delta, p.T_sys, gamma) * occ[lo - 1] - bath_rate(2, delta, p.T_sys, gamma) * occ[hi - 1]


@dataclass
class CurrentsReport:
    J_L_12: float
    J_R_12: float
    J_D_12: float
    J_D_34: float
    J_H_map: dict
    J_C_map: dict
    J_Ph_43: float
    J_Ph_21: float
    J_uniform: float
    J_spread: float
    J_H_M: float  # exchange contribution to d rho^T_22 / dt
    J_C_M: float  # exchange contribution to d rho^B_22 / dt
    contributions: dict = field(repr=False, default_factory=dict)

    def transition_totals(self):
        H, C = self.J_H_map, self.J_C_map
        return {
            "1->4": H["1->4"] + C["1->4"],
            "4->3": H["4->3"] + C["4->3"] + self.J_Ph_43 - self.J_D_34,
            "3->2": H["3->2"] + C["3->2"],
            "2->1": H["2->1"] + C["2->1"] + self.J_Ph_21 - self.J_D_12,
            "4->2": H["4->2"] + C["4->2"],
        }

    def level_balance(self):
        """d rho^M_ii / dt reassembled from the per-term contributions."""
        return sum(self.contributions.values())

    def flat(self):
        """Scalar fields for tabular output."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "contributions":
                continue
            if isinstance(v, dict):
                for k in TRANSITIONS:
                    out[f"{f.name[:-4]}_{k.replace('->', 'to')}_per_ps"] = float(v[k])
            else:
                out[f"{f.name}_per_ps"] = float(v)
        return out


def _commutator_term(H, rho):
    return (-1j / HBAR) * (H @ rho - rho @ H)


def _diag_of(d, slot):
    return np.real(np.diag(partial_trace(d, slot)))


def flow_decomposition(state, p):
    """Split d rho^M_ii / dt into additive per-term currents."""
    rho = state.rho
    contrib = {}
    H_map = {k: 0.0 for k in TRANSITIONS}
    C_map = {k: 0.0 for k in TRANSITIONS}
    J_H_M = J_C_M = 0.0
    for term in interaction_terms(p):
        d = _commutator_term(term.operator, rho)
        m = _diag_of(d, M)
        contrib[f"{term.side}:{term.lower}{term.upper}"] = m
        key = _EXCHANGE_KEY[(term.lower, term.upper)]
        # flux upper -> lower equals the gain of the lower level
        flux_down = m[term.lower - 1]
        value = -flux_down if key == "1->4" else flux_down
        if term.side == "H":
            H_map[key] += value
            J_H_M += _diag_of(d, SLOT_T)[1]
        else:
            C_map[key] += value
            J_C_M += _diag_of(d, SLOT_B)[1]
    ph = {}
    for mode, amp in ((1, state.B1), (2, state.B2)):
        X = mode_lowering(mode)
        Hd = HBAR * p.g * (np.conj(amp) * X + amp * X.conj().T)
        m = _diag_of(_commutator_term(Hd, rho), M)
        contrib[f"Ph{mode}"] = m
        lo, _ = MODE_TRANSITIONS[mode]
        ph[mode] = m[lo - 1]
    for ch in build_channels(p):
        if ch.rate == 0 or ch.slot != M:
            continue
        L = ch.operator
        Ld = L.conj().T
        d = ch.rate * (L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L))
        key = f"D:{ch.tag}"
        contrib[key] = contrib.get(key, 0.0) + _diag_of(d, M)
    J_L = bath_current(rho, "L", p)
    J_R = bath_current(rho, "R", p)
    J_D12 = dissipation_current(rho, 12, p)
    J_D34 = dissipation_current(rho, 34, p)
    chain = np.array([J_L, H_map["1->4"], ph[1] - J_D34, C_map["3->2"], ph[2] - J_D12, -J_R])
    return CurrentsReport(
        J_L_12=float(J_L), J_R_12=float(J_R), J_D_12=float(J_D12), J_D_34=float(J_D34),
        J_H_map={k: float(v) for k, v in H_map.items()},
        J_C_map={k: float(v) for k, v in C_map.items()},
        J_Ph_43=float(ph[1]), J_Ph_21=float(ph[2]),
        J_uniform=float(chain.mean()), J_spread=float(chain.max() - chain.min()),
        J_H_M=float(J_H_M), J_C_M=float(J_C_M), contributions=contrib,
    )


class HeatFlows(NamedTuple):
    Qdot_H: float
    Qdot_C: float
    Qdot_D12: float
    Qdot_D34: float


def heat_flows(report, p):
    """Heat currents in meV/ps (see module docstring for signs)."""
    return HeatFlows(
        p.delta_T * report.J_L_12,
        -p.delta_B * report.J_R_12,
        -p.eps(1, 2) * report.J_D_12,
        -p.eps(3, 4) * report.J_D_34,
    )


def _over(q, temp, name):
    if q == 0:
        return 0.0
    if not temp > 0:
        raise InvalidInputError(f"{name} must be > 0 when its heat flow is nonzero")
    return q / temp


def entropy_production(heats, p):
    """-Q_H/T_H + Q_C/T_C + (Q_D12 + Q_D34)/T_sys in meV/(ps K)."""
    return (-_over(heats.Qdot_H, p.T_H, "T_H") + _over(heats.Qdot_C, p.T_C, "T_C")
            + _over(heats.Qdot_D12, p.T_sys, "T_sys") + _over(heats.Qdot_D34, p.T_sys, "T_sys"))


def threshold_from(eps_T, eps_B, T_C):
    if eps_B <= 0:
        raise InvalidInputError("bottom-filter splitting must be > 0")
    return (eps_T - eps_B) * T_C / eps_B


def threshold_delta_T(p):
    """Minimum T_H - T_C for lasing: (eps_T / eps_B - 1) T_C."""
    return threshold_from(p.delta_T, p.delta_B, p.T_C)


def efficiencies(heats, p):
    """(eta_ideal, eta, eta_carnot); eta is NaN when Qdot_H vanishes."""
    QH, QC, D12, D34 = heats
    if abs(QH) > QH_EPS:
        eta_ideal = (QH - QC) / QH
        eta = (QH - QC - D12 - D34) / QH
    else:
        eta_ideal = 1.0 - p.delta_B / p.delta_T if p.delta_T > 0 else math.nan
        eta = math.nan
    eta_carnot = 1.0 - p.T_C / p.T_H if p.T_H > 0 else math.nan
    return eta_ideal, eta, eta_carnot


@dataclass
class ThermoReport:
    Qdot_H: float
    Qdot_C: float
    Qdot_D12: float
    Qdot_D34: float
    Sdot: float
    eta_ideal: float
    eta: float
    eta_carnot: float
    deltaT_threshold: float

    def flat(self):
        return {
            "Qdot_H_meV_per_ps": self.Qdot_H, "Qdot_C_meV_per_ps": self.Qdot_C,
            "Qdot_D12_meV_per_ps": self.Qdot_D12, "Qdot_D34_meV_per_ps": self.Qdot_D34,
            "Sdot_meV_per_ps_K": self.Sdot, "eta_ideal": self.eta_ideal, "eta": self.eta,
            "eta_carnot": self.eta_carnot, "deltaT_threshold_K": self.deltaT_threshold,
        }


def thermo_report(report, p):
    heats = heat_flows(report, p)
    eta_ideal, eta, eta_c = efficiencies(heats, p)
    return ThermoReport(*heats, entropy_production(heats, p), eta_ideal, eta, eta_c,
                        threshold_delta_T(p))
