"""A quantum SWITCH assembled from two spontaneous decays.

Atom A's decay applies H (x) U_A to control (x) system, atom B's applies
Z (x) U_B. With the control in |+>, whichever atom decays first leaves the
control in |0> or |1>, so the two orders land in different control states.
The timing machine still remembers which came first, though. Tracing it out
leaves a mixture. Once the machine records only the unordered pair of times,
the SC state becomes pure and matches the ideal SWITCH.
"""

from timeswitch.decay_engine import DecayParams, GateSet, evolve_aggregated, order_probabilities, reduced_sc_state
from timeswitch.qcore import basis, fidelity, pauli_x, pauli_z
from timeswitch.realizations import switch_from_decays, symmetrize_timer, unequal_rate_diagnostics
from timeswitch.switch_verify import ideal_switch

gates = GateSet(pauli_x(), pauli_z())
phi = basis(2, 0)
target = ideal_switch(gates.u_a, gates.u_b, phi)

# Pick enough steps that both atoms have decayed with probability 1 - 1e-4.
params = DecayParams(1.0, 1.0, 1e-3, 0).steps_for_incomplete(1e-4)
state = evolve_aggregated(params, gates, phi)
probs = order_probabilities(state)
print(f"N={params.n_steps}: p(A first)={probs.p_a_first:.5f} p(B first)={probs.p_b_first:.5f} "
      f"incomplete={probs.p_incomplete:.1e} coincident={probs.p_coincident:.1e}")

ordered = reduced_sc_state(state)
print(f"ordered records:     purity={ordered.purity():.6f}  fidelity to SWITCH={fidelity(ordered, target):.6f}")

sym = reduced_sc_state(symmetrize_timer(state))
print(f"unordered records:   purity={sym.purity():.12f}  fidelity to SWITCH={fidelity(sym, target):.12f}")

# The same pipeline, packaged, with the pure SC ket pulled out.
result = switch_from_decays(params, gates, phi)
print("extracted SC ket:", result.sc_state.amplitudes.round(6))

# Unequal rates: order weights are no longer balanced and the state stays mixed.
diag = unequal_rate_diagnostics(DecayParams(2.0, 1.0, 1e-3, 0).steps_for_incomplete(1e-4), gates, phi)
print(f"gamma_A = 2 gamma_B: purity={diag.purity:.6f}  fidelity={diag.mixed_fidelity:.6f}")
