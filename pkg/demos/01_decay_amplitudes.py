"""Discrete decay amplitudes and how they approach the continuum.

Each atom decays in a given step with probability dp = gamma * dt. The
amplitude for "decayed in step k" is sqrt(dp) (1 - dp)^((k-1)/2); divided by
sqrt(dt) it should approach the continuum density amplitude
sqrt(gamma) exp(-gamma t / 2), with an error that shrinks linearly in dt.
"""

from timeswitch.decay_engine import DecayParams, discrete_continuum_check, fit_convergence_order, jump_amplitude

gamma, span = 1.0, 10.0

# A single amplitude first: the first three steps at dt = 0.01.
for k in (1, 2, 3):
    print(f"jump amplitude, step {k}: {jump_amplitude(gamma * 0.01, k):.6f}")

# Now the worst-case deviation over a fixed time window, for shrinking steps.
dts = [8e-3, 4e-3, 2e-3, 1e-3]
devs = []
for dt in dts:
    params = DecayParams(gamma, gamma, dt, round(span / dt))
    devs.append(discrete_continuum_check(params))
    print(f"dt={dt:.0e}  N={params.n_steps:6d}  max deviation={devs[-1]:.3e}")

print(f"fitted order in dt: {fit_convergence_order(dts, devs):.3f}")
