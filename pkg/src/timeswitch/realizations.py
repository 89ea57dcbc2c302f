"""Physical realizations that turn timer-correlated branches into a quantum SWITCH.

Time-bin photons: the machine sees either (A early, B late) or the
reverse, and machine+control together act as the SWITCH control.

Decaying atoms: the timer stores an unordered pair of arrival times, so
mirrored records merge and, for equal rates, the machine factors out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .decay_engine import (
    DEFAULT_INCOMPLETE_THRESHOLD,
    AggregatedState,
    BranchState,
    DecayParams,
    GateSet,
    TimerRecord,
    evolve,
    evolve_aggregated,
    incomplete_and_coincident,
    initial_sc,
    reduced_sc_state,
)
from .qcore import DensityMatrix, Ket, basis, fidelity, tensor
from .switch_verify import ideal_switch

EIG_GAP_MIN = 1e-9
PROJECTION_ATOL = 1e-12


class DecouplingError(RuntimeError):
    """The reduced control/system state has no unique dominant eigenvector."""


class UnequalRatesError(ValueError):
    pass


@dataclass(frozen=True)
class TimeBinConfig:
    t_early: float
    t_late: float
    gates: GateSet
    phi: Ket

    def __post_init__(self):
        if not self.t_early < self.t_late:
            raise ValueError(f"need t_early < t_late, got {self.t_early} >= {self.t_late}")


def time_bin_full_state(cfg: TimeBinConfig) -> Ket:
    """State over machine (x) control (x) system after both photons triggered.

    Machine basis: |0> = record (t_A, t_B) = (t_early, t_late), |1> = the
    swapped record. Each carries amplitude 1/sqrt(2) from the time-bin
    source state.
    """
    cfg.gates.check_phi(cfg.phi)
    g = cfg.gates
    sc0 = initial_sc(cfg.phi)
    a_early = g.trigger_b @ (g.trigger_a @ sc0)
    b_early = g.trigger_a @ (g.trigger_b @ sc0)
    amp = 1 / math.sqrt(2)
    return tensor(basis(2, 0), a_early) * amp + tensor(basis(2, 1), b_early) * amp


def time_bin_state(cfg: TimeBinConfig) -> Ket:
    """Project machine+control onto the two composite control states.

    Returns a ket over (composite control, system) where composite |0> is
    record (early, late) with control |0>, and |1> is (late, early) with
    control |1>.
    """
    full = time_bin_full_state(cfg)
    d = cfg.phi.dim
    t = full.amplitudes.reshape(2, 2, d)
    out = np.stack([t[0, 0], t[1, 1]]).reshape(-1)
    leak = 1.0 - float(np.vdot(out, out).real)
    if abs(leak) > PROJECTION_ATOL:
        raise ValueError(f"control gates leave weight {leak:.3e} outside the composite control states")
    return Ket(out, (2, d))


def symmetrize_timer(state):
    """Forget which atom's photon reached the timer first.

    Both-decayed records (k, l) and (l, k) become one unordered record whose
    ket is the coherent sum. Records with a pending decay stay ordered.
    """
    if isinstance(state, AggregatedState):
        return replace(state, symmetrized=True)
    merged: dict[TimerRecord, Ket] = {}
    for rec, ket in state.branches.items():
        if rec.both_decayed:
            key = TimerRecord.unordered(rec.step_a, rec.step_b)
            merged[key] = merged[key] + ket if key in merged else ket
        else:
            merged[rec] = ket
    return BranchState(state.params, merged, state.current_step, state.dropped_weight)


def dominant_ket(rho: DensityMatrix, gap_min: float = EIG_GAP_MIN) -> Ket:
    """Top eigenvector, phase-fixed so its largest component is real positive."""
    w, v = rho.eigh()
    if w.size > 1 and w[-1] - w[-2] < gap_min:
        raise DecouplingError(f"top eigenvalues {w[-1]:.6g}, {w[-2]:.6g} are degenerate")
    vec = v[:, -1]
    i = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[i]) / vec[i])
    return Ket(vec, rho.dims)


@dataclass(frozen=True)
class DecaySwitch:
    sc_state: Ket
    rho: DensityMatrix
    fidelity_to_ideal: float
    mixed_fidelity: float
    purity: float
    truncation_weight: float
    p_incomplete: float


def switch_from_decays(params: DecayParams, gates: GateSet, phi: Ket, *,
                       threshold: float = DEFAULT_INCOMPLETE_THRESHOLD,
                       enumerate_branches: bool = False) -> DecaySwitch:
    """Evolve, symmetrize the timer, trace it out and read off the SWITCH state."""
    if params.gamma_a != params.gamma_b:
        raise UnequalRatesError(
            "machine decoupling needs gamma_a == gamma_b; use unequal_rate_diagnostics for other rates"
        )
    return _run(params, gates, phi, threshold, enumerate_branches)


def unequal_rate_diagnostics(params: DecayParams, gates: GateSet, phi: Ket, *,
                             threshold: float = DEFAULT_INCOMPLETE_THRESHOLD,
                             enumerate_branches: bool = False) -> DecaySwitch:
    """Same pipeline without the equal-rate requirement; purity < 1 flags residual machine entanglement."""
    return _run(params, gates, phi, threshold, enumerate_branches, strict=False)


def _run(params, gates, phi, threshold, enumerate_branches, strict=True):
    state = evolve(params, gates, phi) if enumerate_branches else evolve_aggregated(params, gates, phi)
    sym = symmetrize_timer(state)
    rho = reduced_sc_state(sym, threshold)
    p_inc, p_co = incomplete_and_coincident(sym)
    try:
        ket = dominant_ket(rho)
    except DecouplingError:
        if strict:
            raise
        w, v = rho.eigh()
        ket = Ket(v[:, -1], rho.dims)
    target = ideal_switch(gates.u_a, gates.u_b, phi)
    return DecaySwitch(ket, rho, fidelity(ket, target), fidelity(rho, target), rho.purity(),
                       p_inc + p_co, p_inc)
