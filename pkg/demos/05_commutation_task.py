"""Deciding whether two gates commute with one use of each.

Measuring the SWITCH control in the |+>/|-> basis gives |-> with
probability ||(U_B U_A - U_A U_B) phi||^2 / 4. For U_A = diag(1, e^{i theta})
and U_B = X acting on |0>, the two orders differ by the phase theta, so
p_minus sweeps through sin^2(theta / 2).
"""

import numpy as np

from timeswitch.decay_engine import DecayParams, GateSet
from timeswitch.qcore import Operator, basis, pauli_x
from timeswitch.realizations import switch_from_decays
from timeswitch.switch_verify import commutation_task, control_pm_probabilities

phi = basis(2, 0)
params = DecayParams(1.0, 1.0, 2e-3, 0).steps_for_incomplete(1e-4)
print(" theta    ideal p_minus   from decays   sin^2(theta/2)")
for theta in np.linspace(0, np.pi, 5):
    ua = Operator(np.diag([1, np.exp(1j * theta)]))
    ideal = commutation_task(ua, pauli_x(), phi).p_minus
    decayed = control_pm_probabilities(switch_from_decays(params, GateSet(ua, pauli_x()), phi).rho)[1]
    print(f"{theta:6.3f}   {ideal:12.9f}   {decayed:11.9f}   {np.sin(theta / 2) ** 2:12.9f}")
