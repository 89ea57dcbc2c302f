"""Discretized two-emitter decay evolution driving a control qubit and a system.

Two atoms A and B decay with per-step probabilities ``dp_a = gamma_a * dt``
and ``dp_b = gamma_b * dt``. A decay of A applies ``v_a (x) u_a`` to
control (x) system and the machine records the step index; likewise for B.
Simultaneous decays inside one step are dropped, and their weight is kept
in a separate ``dropped_weight`` bucket so the bookkeeping always closes.

Two evolution paths are provided:

* ``evolve`` enumerates every branch explicitly (a dict keyed by
  ``TimerRecord``). It is exact and serves as the reference, but holds
  O(N^2) branches.
* ``evolve_aggregated`` exploits that control/system kets depend only on
  the decay *order*, and tracks five branch classes plus the coherence
  needed for timer symmetrization. It is O(1) per step.

Continuum objects (``JointAmplitude``, ``mprime_states``,
``joint_amplitude_analysis``) live on a cell grid in (t_A, t_B).

Subsystem order for every control/system ket is (control, system).
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .qcore import (
    DensityMatrix,
    DimensionError,
    Ket,
    Operator,
    basis,
    hadamard,
    kron,
    pauli_z,
    plus,
    tensor,
)

log = logging.getLogger(__name__)

MAX_DP = 0.1
DEFAULT_MAX_BRANCHES = 10_000_000
DEFAULT_INCOMPLETE_THRESHOLD = 1e-4
NORM_ATOL = 1e-10
STEP_DRIFT_TOL = 1e-8
GRID_NORM_ATOL = 1e-6

DpSchedule = Callable[[int], tuple[float, float]]


class DiscretizationError(ValueError):
    """Per-step decay probability too large for the first-order step."""


class TruncationError(RuntimeError):
    """Too much weight left in branches where a decay has not happened yet."""


class BranchOverflowError(RuntimeError):
    pass


class BookkeepingError(RuntimeError):
    pass


def max_branches() -> int:
    env = os.environ.get("TSWITCH_MAX_BRANCHES")
    return int(env) if env else DEFAULT_MAX_BRANCHES


# --- scalar amplitudes -------------------------------------------------------

def delta_p(gamma: float, dt: float) -> float:
    """Decay probability within one step of length ``dt``."""
    if gamma < 0:
        raise ValueError(f"rate must be non-negative, got {gamma}")
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    dp = gamma * dt
    if dp > MAX_DP:
        raise DiscretizationError(
            f"gamma*dt = {dp:.4g} exceeds {MAX_DP}; reduce dt below {MAX_DP / gamma:.4g}"
        )
    return dp


def survival_amplitude(dp: float, n: int) -> float:
    """Amplitude for no decay during ``n`` steps: (1 - dp)**(n/2)."""
    return (1.0 - dp) ** (n / 2.0)


def jump_amplitude(dp: float, k: int) -> float:
    """Amplitude for the decay to land in step ``k`` (k >= 1)."""
    if k < 1:
        raise ValueError(f"step index must be >= 1, got {k}")
    return math.sqrt(dp) * (1.0 - dp) ** ((k - 1) / 2.0)


def cumulative_decay_probability(dp: float, k):
    """Probability that the decay happened at or before step ``k``."""
    return 1.0 - (1.0 - dp) ** np.asarray(k, dtype=float)


def chi_continuous(gamma: float, t, t0: float = 0.0):
    """Continuum decay amplitude density sqrt(gamma) exp(-gamma (t - t0) / 2), zero before t0."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= t0, np.sqrt(gamma) * np.exp(-gamma * np.maximum(t - t0, 0.0) / 2.0), 0.0)
    return out if out.ndim else float(out)


def asymptotic_a_first(gamma_a: float, gamma_b: float) -> float:
    return gamma_a / (gamma_a + gamma_b)


# --- parameters and gates ----------------------------------------------------

@dataclass(frozen=True)
class DecayParams:
    gamma_a: float
    gamma_b: float
    dt: float
    n_steps: int
    t0: float = 0.0

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError(f"n_steps must be >= 0, got {self.n_steps}")
        # validates both rates against the step size
        delta_p(self.gamma_a, self.dt)
        delta_p(self.gamma_b, self.dt)

    @property
    def dp_a(self) -> float:
        return self.gamma_a * self.dt

    @property
    def dp_b(self) -> float:
        return self.gamma_b * self.dt

    def time(self, k):
        return self.t0 + np.asarray(k) * self.dt

    @property
    def span(self) -> float:
        return self.dt * self.n_steps

    def check_asymptotic_span(self) -> None:
        if min(self.gamma_a, self.gamma_b) <= 0:
            raise TruncationError("both rates must be positive for both decays to complete")
        need = max(1.0 / self.gamma_a, 1.0 / self.gamma_b)
        if self.span < need:
            raise TruncationError(
                f"simulated span {self.span:.4g} shorter than the slowest lifetime {need:.4g}; increase n_steps"
            )

    def steps_for_incomplete(self, target: float) -> "DecayParams":
        """Copy with enough steps that the not-both-decayed weight is below ``target``."""
        # P(not both) <= (1-a)^N + (1-b)^N
        slow = min(self.dp_a, self.dp_b)
        if slow <= 0:
            raise ValueError("both rates must be positive")
        n = math.ceil(math.log(target / 2.0) / math.log1p(-slow))
        return replace(self, n_steps=max(n, 1))


@dataclass(frozen=True)
class GateSet:
    """System unitaries triggered by each decay, and the matching control unitaries."""

    u_a: Operator
    u_b: Operator
    v_a: Operator = field(default_factory=hadamard)
    v_b: Operator = field(default_factory=pauli_z)

    def __post_init__(self):
        for name in ("u_a", "u_b", "v_a", "v_b"):
            op = getattr(self, name)
            if not op.is_unitary():
                raise ValueError(f"{name} is not unitary")
        if self.u_a.dim_in != self.u_b.dim_in:
            raise DimensionError(f"u_a is {self.u_a.dim_in}-dimensional but u_b is {self.u_b.dim_in}-dimensional")
        if self.v_a.dim_in != 2 or self.v_b.dim_in != 2:
            raise DimensionError("control unitaries must act on a qubit")

    @property
    def system_dim(self) -> int:
        return self.u_a.dim_in

    @property
    def trigger_a(self) -> Operator:
        return kron(self.v_a, self.u_a)

    @property
    def trigger_b(self) -> Operator:
        return kron(self.v_b, self.u_b)

    def check_phi(self, phi: Ket) -> None:
        if phi.dim != self.system_dim:
            raise DimensionError(f"phi has dimension {phi.dim}, gates act on dimension {self.system_dim}")
        if not phi.is_normalized():
            raise ValueError(f"phi is not normalized (norm^2 = {phi.norm_sq():.15g})")

    def class_kets(self, phi: Ket) -> dict[str, Ket]:
        """Normalized control/system kets of the five branch classes."""
        ee = initial_sc(phi)
        a, b = self.trigger_a @ ee, self.trigger_b @ ee
        return {"ee": ee, "a": a, "b": b, "ab": self.trigger_b @ a, "ba": self.trigger_a @ b}


def initial_sc(phi: Ket) -> Ket:
    return tensor(plus(), phi)


# --- timer records and the enumerated state ----------------------------------

@dataclass(frozen=True)
class TimerRecord:
    """Step indices registered by the machine; ``None`` means not yet triggered.

    With ``ordered=False`` the record is an unordered pair stored sorted
    in (step_a, step_b), so (k, l) and (l, k) compare equal.
    """

    step_a: Optional[int] = None
    step_b: Optional[int] = None
    ordered: bool = True

    @classmethod
    def unordered(cls, k: int, l: int) -> "TimerRecord":
        lo, hi = sorted((k, l))
        return cls(lo, hi, ordered=False)

    @property
    def is_ready(self) -> bool:
        return self.step_a is None and self.step_b is None

    @property
    def both_decayed(self) -> bool:
        return self.step_a is not None and self.step_b is not None

    @property
    def a_first(self) -> bool:
        return self.ordered and self.both_decayed and self.step_a < self.step_b


READY = TimerRecord()


@dataclass(frozen=True)
class BranchState:
    """Explicit branch map: timer record -> control/system ket (amplitude in the norm).

    ``pending`` lists records still waiting for a decay; completed records
    never change again, and their total weight is cached.
    """

    params: DecayParams
    branches: dict
    current_step: int = 0
    dropped_weight: float = 0.0
    pending: tuple = None
    completed_weight: float = None

    def __post_init__(self):
        if self.pending is None:
            object.__setattr__(self, "pending", tuple(r for r in self.branches if not r.both_decayed))
        if self.completed_weight is None:
            w = sum(k.norm_sq() for r, k in self.branches.items() if r.both_decayed)
            object.__setattr__(self, "completed_weight", float(w))

    @property
    def pending_weight(self) -> float:
        return float(sum(self.branches[r].norm_sq() for r in self.pending))

    @property
    def branch_norm(self) -> float:
        return self.completed_weight + self.pending_weight

    @property
    def total_weight(self) -> float:
        """Kept branch weight plus the dropped coincident-decay weight."""
        return self.branch_norm + self.dropped_weight

    @property
    def symmetrized(self) -> bool:
        return any(not r.ordered for r in self.branches)


def initial_state(params: DecayParams, gates: GateSet, phi: Ket) -> BranchState:
    gates.check_phi(phi)
    return BranchState(params, {READY: initial_sc(phi)}, 0, 0.0)


def _step_dps(params: DecayParams, k: int, schedule: DpSchedule | None) -> tuple[float, float]:
    if schedule is None:
        return params.dp_a, params.dp_b
    a, b = schedule(k)
    if not (0 <= a <= MAX_DP and 0 <= b <= MAX_DP):
        raise DiscretizationError(f"schedule step {k} gives dp=({a}, {b}) outside [0, {MAX_DP}]")
    return a, b


def step(state: BranchState, gates: GateSet, schedule: DpSchedule | None = None) -> BranchState:
    """Advance every branch by one time step."""
    before = state.total_weight
    if abs(before - 1.0) > NORM_ATOL:
        raise BookkeepingError(f"input state weight {before!r} is not 1")
    k = state.current_step + 1
    a, b = _step_dps(state.params, k, schedule)
    ta, tb = gates.trigger_a, gates.trigger_b
    out = dict(state.branches)
    pending = []
    dropped = state.dropped_weight
    completed = state.completed_weight

    def put(rec, ket, new=True):
        nonlocal completed
        if new and rec in out:
            raise BookkeepingError(f"timer record {rec} produced twice")
        out[rec] = ket
        if rec.both_decayed:
            completed += ket.norm_sq()
        else:
            pending.append(rec)

    for rec in state.pending:
        ket = state.branches[rec]
        if rec.is_ready:
            put(rec, ket * math.sqrt((1 - a) * (1 - b)), new=False)
            if a > 0:
                put(TimerRecord(k, None), ta @ ket * math.sqrt(a * (1 - b)))
            if b > 0:
                put(TimerRecord(None, k), tb @ ket * math.sqrt((1 - a) * b))
            dropped += ket.norm_sq() * a * b
        elif rec.step_b is None:
            put(rec, ket * math.sqrt(1 - b), new=False)
            if b > 0:
                put(TimerRecord(rec.step_a, k), tb @ ket * math.sqrt(b))
        else:
            put(rec, ket * math.sqrt(1 - a), new=False)
            if a > 0:
                put(TimerRecord(k, rec.step_b), ta @ ket * math.sqrt(a))

    new = BranchState(state.params, out, k, dropped, tuple(pending), completed)
    drift = abs(new.total_weight - before)
    if drift > STEP_DRIFT_TOL:
        raise BookkeepingError(f"weight drift {drift:.3e} in step {k}")
    return new


def predicted_branch_count(n: int) -> int:
    """Branches after n steps with both rates positive: ready + 2n singles + n(n-1) ordered pairs."""
    return 1 + 2 * n + n * (n - 1)


def evolve(params: DecayParams, gates: GateSet, phi: Ket, *, cap: int | None = None,
           schedule: DpSchedule | None = None) -> BranchState:
    """Exact N-step evolution by explicit branch enumeration."""
    cap = max_branches() if cap is None else cap
    need = predicted_branch_count(params.n_steps)
    if need > cap:
        raise BranchOverflowError(
            f"{params.n_steps} steps need {need} branches, above the cap {cap}; "
            "use evolve_aggregated or raise TSWITCH_MAX_BRANCHES"
        )
    state = initial_state(params, gates, phi)
    for _ in range(params.n_steps):
        state = step(state, gates, schedule)
    return state


# --- aggregated path ---------------------------------------------------------

@dataclass(frozen=True)
class AggregatedState:
    """Branch weights summed per decay-order class.

    ``w_ee`` undecayed, ``w_a``/``w_b`` only A/B decayed, ``w_ab``/``w_ba``
    both decayed with A/B first. ``pair_coherence`` is the sum over step
    pairs k < l of amp(A at k, B at l) * amp(A at l, B at k); it is the
    cross term that appears when the timer forgets the order.
    """

    params: DecayParams
    gates: GateSet
    phi: Ket
    current_step: int
    w_ee: float
    w_a: float
    w_b: float
    w_ab: float
    w_ba: float
    dropped_weight: float
    pair_coherence: float
    symmetrized: bool = False
    history: Optional[np.ndarray] = None

    HISTORY_COLUMNS = ("w_ee", "w_a", "w_b", "w_ab", "w_ba", "dropped")

    @property
    def branch_norm(self) -> float:
        return self.w_ee + self.w_a + self.w_b + self.w_ab + self.w_ba

    @property
    def total_weight(self) -> float:
        return self.branch_norm + self.dropped_weight


def evolve_aggregated(params: DecayParams, gates: GateSet, phi: Ket, *,
                      schedule: DpSchedule | None = None, track_history: bool = False) -> AggregatedState:
    """N-step evolution summed per order class, O(1) work per step.

    With ``track_history`` the class weights after every step are kept in
    an (N, 6) array, columns as in ``AggregatedState.HISTORY_COLUMNS``.
    """
    gates.check_phi(phi)
    w_ee, w_a, w_b, w_ab, w_ba, dropped = 1.0, 0.0, 0.0, 0.0, 0.0, 0.0
    cross = 0.0  # sum_k amp(A-only branch k) * amp(B-only branch k)
    coh = 0.0
    hist = np.empty((params.n_steps, 6)) if track_history else None
    for k in range(1, params.n_steps + 1):
        a, b = _step_dps(params, k, schedule)
        coh += cross * math.sqrt(a * b)
        cross = cross * math.sqrt((1 - a) * (1 - b)) + w_ee * math.sqrt(a * b * (1 - a) * (1 - b))
        w_ab += w_a * b
        w_ba += w_b * a
        w_a = w_a * (1 - b) + w_ee * a * (1 - b)
        w_b = w_b * (1 - a) + w_ee * (1 - a) * b
        dropped += w_ee * a * b
        w_ee *= (1 - a) * (1 - b)
        if track_history:
            hist[k - 1] = w_ee, w_a, w_b, w_ab, w_ba, dropped
    return AggregatedState(params, gates, phi, params.n_steps, w_ee, w_a, w_b, w_ab, w_ba,
                           dropped, coh, False, hist)


# --- order statistics and reduced states -------------------------------------

@dataclass(frozen=True)
class OrderProbabilities:
    p_a_first: float
    p_b_first: float
    p_incomplete: float
    p_coincident: float

    @property
    def total(self) -> float:
        return self.p_a_first + self.p_b_first + self.p_incomplete + self.p_coincident


def order_probabilities(state) -> OrderProbabilities:
    """Weight of A-first, B-first, not-both-decayed and dropped coincident branches."""
    if isinstance(state, AggregatedState):
        return OrderProbabilities(state.w_ab, state.w_ba, state.w_ee + state.w_a + state.w_b,
                                  state.dropped_weight)
    pa = pb = pi = 0.0
    for rec, ket in state.branches.items():
        w = ket.norm_sq()
        if not rec.both_decayed:
            pi += w
        elif not rec.ordered:
            raise ValueError("order statistics need ordered timer records; call before symmetrize_timer")
        elif rec.step_a < rec.step_b:
            pa += w
        else:
            pb += w
    return OrderProbabilities(pa, pb, pi, state.dropped_weight)


def discarded_weight(state) -> float:
    """Weight excluded from the reduced state: incomplete plus coincident branches."""
    return sum(incomplete_and_coincident(state))


def incomplete_and_coincident(state) -> tuple[float, float]:
    """(p_incomplete, p_coincident), valid for ordered and symmetrized states."""
    if isinstance(state, AggregatedState):
        return state.w_ee + state.w_a + state.w_b, state.dropped_weight
    pi = sum(k.norm_sq() for r, k in state.branches.items() if not r.both_decayed)
    return pi, state.dropped_weight


def _check_complete(state, threshold: float) -> float:
    state.params.check_asymptotic_span()
    p_inc, p_co = incomplete_and_coincident(state)
    if p_inc > threshold:
        raise TruncationError(
            f"incomplete weight {p_inc:.3e} above threshold {threshold:.1e}; increase n_steps"
        )
    kept = 1.0 - p_inc - p_co
    log.debug("reduced state discards %.3e incomplete and %.3e coincident weight", p_inc, p_co)
    return kept


def reduced_sc_state(state, threshold: float = DEFAULT_INCOMPLETE_THRESHOLD) -> DensityMatrix:
    """Control/system state after tracing out the machine, over completed branches.

    Distinct timer records are orthogonal, so the reduced state is a sum of
    per-record projectors; renormalized by the kept weight.
    """
    _check_complete(state, threshold)
    if isinstance(state, AggregatedState):
        kets = state.gates.class_kets(state.phi)
        x, y = kets["ab"].amplitudes, kets["ba"].amplitudes
        m = state.w_ab * np.outer(x, x.conj()) + state.w_ba * np.outer(y, y.conj())
        if state.symmetrized:
            c = state.pair_coherence
            m = m + c * (np.outer(x, y.conj()) + np.outer(y, x.conj()))
        dims = kets["ab"].dims
    else:
        m = None
        dims = None
        for rec, ket in state.branches.items():
            if rec.both_decayed:
                v = ket.amplitudes
                m = np.outer(v, v.conj()) if m is None else m + np.outer(v, v.conj())
                dims = ket.dims
        if m is None:
            raise TruncationError("no completed branches")
    tr = np.trace(m).real
    return DensityMatrix(m / tr, dims)


# --- discrete vs continuum ----------------------------------------------------

def discrete_continuum_check(params: DecayParams) -> float:
    """max_k |jump_amplitude(k)/sqrt(dt) - chi(t_k)| over both atoms and k = 1..N."""
    if params.n_steps == 0:
        return 0.0
    k = np.arange(1, params.n_steps + 1)
    t = params.time(k)
    dev = 0.0
    for gamma, dp in ((params.gamma_a, params.dp_a), (params.gamma_b, params.dp_b)):
        disc = np.sqrt(dp) * (1.0 - dp) ** ((k - 1) / 2.0) / math.sqrt(params.dt)
        dev = max(dev, float(np.max(np.abs(disc - chi_continuous(gamma, t, params.t0)))))
    return dev


def fit_convergence_order(dts, errors) -> float:
    """Slope of log(error) against log(dt)."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size < 2:
        raise ValueError("need at least two step sizes to fit an order")
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


# --- joint time amplitudes on a grid ------------------------------------------

@dataclass(frozen=True, eq=False)
class JointAmplitude:
    """Amplitude density chi(t_A, t_B) sampled on square cells of side ``h``.

    ``values[i, j]`` is the density in the cell with t_A in
    [t0 + i h, t0 + (i+1) h) and t_B in [t0 + j h, t0 + (j+1) h).
    """

    values: np.ndarray
    h: float
    t0: float = 0.0

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.h ** 2)

    def check_normalized(self, atol: float = GRID_NORM_ATOL) -> None:
        nrm = self.norm_sq()
        if abs(nrm - 1.0) > atol:
            raise ValueError(f"joint amplitude grid has norm^2 {nrm:.8g}, expected 1 within {atol}")

    @classmethod
    def separable_exponential(cls, gamma_a: float, gamma_b: float, h: float, n: int,
                              t0: float = 0.0) -> "JointAmplitude":
        """Product of single-atom decay amplitudes, with exact per-cell probabilities."""
        def cell_amps(g):
            edges = np.arange(n + 1) * h
            w = -np.diff(np.exp(-g * edges))
            return np.sqrt(w / h)
        return cls(np.outer(cell_amps(gamma_a), cell_amps(gamma_b)).astype(complex), h, t0)

    @classmethod
    def time_bin(cls, t_early: float, t_late: float, h: float, n: int, t0: float = 0.0) -> "JointAmplitude":
        """Two equal peaks at (early, late) and (late, early)."""
        ie, il = int((t_early - t0) // h), int((t_late - t0) // h)
        if ie == il:
            raise ValueError("early and late times fall in the same grid cell; refine h")
        if not (0 <= ie < n and 0 <= il < n):
            raise ValueError("time-bin peaks outside the grid")
        v = np.zeros((n, n), dtype=complex)
        v[ie, il] = v[il, ie] = 1.0 / (math.sqrt(2.0) * h)
        return cls(v, h, t0)

    @classmethod
    def from_function(cls, f: Callable, h: float, n: int, t0: float = 0.0) -> "JointAmplitude":
        """Sample ``f(t_a, t_b)`` at cell midpoints."""
        t = t0 + (np.arange(n) + 0.5) * h
        return cls(np.asarray(f(t[:, None], t[None, :]), dtype=complex), h, t0)


@dataclass(frozen=True, eq=False)
class MPrimeStates:
    """The two composite machine+control states on the grid.

    Machine basis: the n*n full cells, followed by n lower (t_A < t_B)
    and n upper diagonal half-cells. ``zero`` and ``one`` hold the machine
    coefficients; their control parts are |0> and |1>.
    """

    zero: np.ndarray
    one: np.ndarray
    overlap: complex
    norm_zero: float
    norm_one: float


def mprime_states(params: DecayParams | None = None, joint_chi: JointAmplitude | None = None) -> MPrimeStates:
    """Build the A-first and B-first composite states from a joint amplitude.

    Defaults to the separable exponential on the grid h = dt, n = n_steps.
    """
    if joint_chi is None:
        if params is None:
            raise ValueError("need params or joint_chi")
        joint_chi = JointAmplitude.separable_exponential(params.gamma_a, params.gamma_b,
                                                         params.dt, params.n_steps, params.t0)
    joint_chi.check_normalized()
    v, h, n = joint_chi.values, joint_chi.h, joint_chi.n
    r2 = math.sqrt(2.0)
    i, j = np.indices((n, n))
    zero_full = np.where(i < j, r2 * v * h, 0.0)
    one_full = np.where(i > j, r2 * v * h, 0.0)
    d = np.diagonal(v) * h  # sqrt(2) * chi * h / sqrt(2) on each half-cell
    zeros = np.zeros(n, dtype=complex)
    zero = np.concatenate([zero_full.ravel(), d, zeros])
    one = np.concatenate([one_full.ravel(), zeros, d])
    # full inner product includes the control overlap <0|1>_C
    ctrl = np.vdot(basis(2, 0).amplitudes, basis(2, 1).amplitudes)
    overlap = complex(np.vdot(zero, one) * ctrl)
    return MPrimeStates(zero, one, overlap, float(np.vdot(zero, zero).real), float(np.vdot(one, one).real))


@dataclass(frozen=True)
class JointAnalysis:
    w_a_first: float
    w_b_first: float
    rho: DensityMatrix


def joint_amplitude_analysis(joint_chi: JointAmplitude, gates: GateSet, phi: Ket,
                             symmetrize: bool = False) -> JointAnalysis:
    """Split the joint amplitude by order and attach the order-conditioned kets.

    Diagonal cells contribute half to each order. With ``symmetrize`` the
    machine record (t_A, t_B) is identified with (t_B, t_A) and mirrored
    cells add coherently.
    """
    joint_chi.check_normalized()
    gates.check_phi(phi)
    v, h = joint_chi.values, joint_chi.h
    p = np.abs(v) ** 2 * h ** 2
    diag = float(np.trace(p))
    w_ab = float(np.sum(np.triu(p, 1))) + 0.5 * diag
    w_ba = float(np.sum(np.tril(p, -1))) + 0.5 * diag
    kets = gates.class_kets(phi)
    x, y = kets["ab"].amplitudes, kets["ba"].amplitudes
    m = w_ab * np.outer(x, x.conj()) + w_ba * np.outer(y, y.conj())
    if symmetrize:
        c = complex(np.sum(np.triu(v * v.T.conj(), 1)) * h ** 2) + 0.5 * diag
        m = m + c * np.outer(x, y.conj()) + np.conj(c) * np.outer(y, x.conj())
    total = w_ab + w_ba
    return JointAnalysis(w_ab / total, w_ba / total, DensityMatrix(m / total, kets["ab"].dims))
