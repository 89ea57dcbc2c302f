"""Reference quantum SWITCH states and certification against them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .qcore import DensityMatrix, DimensionError, Ket, Operator, basis, fidelity, minus, plus, tensor

State = Union[Ket, DensityMatrix]


def ideal_switch(u_a: Operator, u_b: Operator, phi: Ket) -> Ket:
    """(|0> u_b u_a |phi> + |1> u_a u_b |phi>) / sqrt(2), control first."""
    d = phi.dim
    for name, u in (("u_a", u_a), ("u_b", u_b)):
        if u.dim_in != d or u.dim_out != d:
            raise DimensionError(f"{name} is {u.dim_out}x{u.dim_in}, phi has dimension {d}")
    ba = u_b @ (u_a @ phi)
    ab = u_a @ (u_b @ phi)
    psi = tensor(basis(2, 0), ba) + tensor(basis(2, 1), ab)
    return (psi * (1 / np.sqrt(2))).normalize()


def control_pm_probabilities(state: State) -> tuple[float, float]:
    """Probabilities of measuring the control (first subsystem) as |+> and |->."""
    if state.dims[0] != 2:
        raise DimensionError(f"first subsystem must be a qubit, got dims {state.dims}")
    d = state.dim // 2
    out = []
    for c in (plus(), minus()):
        proj = np.kron(np.outer(c.amplitudes, c.amplitudes.conj()), np.eye(d))
        if isinstance(state, Ket):
            v = state.amplitudes
            p = np.vdot(v, proj @ v).real / np.vdot(v, v).real
        else:
            p = np.trace(proj @ state.entries).real / state.trace()
        out.append(float(min(max(p, 0.0), 1.0)))
    return out[0], out[1]


@dataclass(frozen=True)
class CommutationStats:
    p_plus: float
    p_minus: float


def commutation_task(u_a: Operator, u_b: Operator, phi: Ket) -> CommutationStats:
    """Control statistics of the SWITCH output in the |+>/|-> basis.

    |+> heralds the commuting part of the two orders, |-> the anticommuting part.
    """
    return CommutationStats(*control_pm_probabilities(ideal_switch(u_a, u_b, phi)))


@dataclass(frozen=True)
class SwitchResult:
    ideal: Ket
    achieved: State
    fidelity: float
    control_outcome_probs: tuple[float, float]


def compare(achieved: State, u_a: Operator, u_b: Operator, phi: Ket) -> SwitchResult:
    target = ideal_switch(u_a, u_b, phi)
    return SwitchResult(target, achieved, fidelity(achieved, target), control_pm_probabilities(achieved))
