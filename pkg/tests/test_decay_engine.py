import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from timeswitch.decay_engine import (
    READY,
    BookkeepingError,
    BranchOverflowError,
    DecayParams,
    DiscretizationError,
    GateSet,
    TimerRecord,
    TruncationError,
    chi_continuous,
    cumulative_decay_probability,
    delta_p,
    discrete_continuum_check,
    evolve,
    evolve_aggregated,
    fit_convergence_order,
    initial_state,
    jump_amplitude,
    order_probabilities,
    predicted_branch_count,
    reduced_sc_state,
    step,
    survival_amplitude,
)
from timeswitch.qcore import Ket, basis, haar_random_unitary, identity, pauli_x, pauli_z, tensor
from timeswitch.realizations import symmetrize_timer

XZ = GateSet(pauli_x(), pauli_z())
ZERO = basis(2, 0)


def haar_gates(seed, d=2):
    return GateSet(haar_random_unitary(d, seed), haar_random_unitary(d, seed + 1000))


def random_phi(seed, d=2):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return Ket(v / np.linalg.norm(v))


class TestScalars:
    def test_delta_p(self):
        assert delta_p(1.0, 0.001) == 0.001
        assert delta_p(0.0, 0.01) == 0.0
        assert delta_p(2.0, 0.05) == pytest.approx(0.1)

    def test_delta_p_too_coarse(self):
        with pytest.raises(DiscretizationError):
            delta_p(3.0, 0.05)

    def test_params_enforce_dp(self):
        with pytest.raises(DiscretizationError):
            DecayParams(1.0, 5.0, 0.05, 10)

    def test_survival(self):
        assert survival_amplitude(0.0, 100) == 1.0
        assert survival_amplitude(0.01, 2) == pytest.approx(0.99, abs=1e-15)

    def test_survival_continuum_limit(self):
        dt = 1e-5
        got = survival_amplitude(delta_p(1.0, dt), round(1.0 / dt))
        assert abs(got - math.exp(-0.5)) <= dt
        assert got == pytest.approx(0.60653, abs=1e-5)

    def test_jump(self):
        assert jump_amplitude(0.04, 1) == pytest.approx(0.2, abs=1e-15)
        assert jump_amplitude(0.01, 3) == pytest.approx(0.099, abs=1e-15)
        with pytest.raises(ValueError):
            jump_amplitude(0.01, 0)

    @pytest.mark.parametrize("dp,n", [(0.1, 7), (0.013, 250), (1e-3, 5000)])
    def test_jump_squares_telescope(self, dp, n):
        brute = sum(jump_amplitude(dp, k) ** 2 for k in range(1, n + 1))
        assert brute == pytest.approx(1 - (1 - dp) ** n, abs=1e-12)
        assert cumulative_decay_probability(dp, n) == pytest.approx(brute, abs=1e-12)

    def test_chi_continuous(self):
        assert chi_continuous(1.0, 0.3, 0.3) == 1.0
        assert chi_continuous(4.0, 0.5) == pytest.approx(2 * math.exp(-1), abs=1e-15)
        assert chi_continuous(4.0, 0.5) == pytest.approx(0.73576, abs=1e-5)
        assert chi_continuous(1.0, -0.1) == 0.0

    @pytest.mark.parametrize("gamma", [0.3, 1.0, 7.0])
    def test_chi_normalized(self, gamma):
        assert oracles.chi_norm_quad(gamma) == pytest.approx(1.0, abs=1e-8)


class TestStep:
    def test_no_decay_unchanged(self):
        p = DecayParams(0.0, 0.0, 0.01, 5)
        s0 = initial_state(p, XZ, ZERO)
        s1 = step(s0, XZ)
        assert list(s1.branches) == [READY]
        np.testing.assert_array_equal(s1.branches[READY].amplitudes, s0.branches[READY].amplitudes)

    def test_first_step_amplitudes(self):
        p = DecayParams(2.0, 3.0, 0.01, 1)
        a, b = p.dp_a, p.dp_b
        s1 = step(initial_state(p, XZ, ZERO), XZ)
        norms = {r: math.sqrt(k.norm_sq()) for r, k in s1.branches.items()}
        assert norms[READY] == pytest.approx(math.sqrt((1 - a) * (1 - b)), abs=1e-15)
        assert norms[TimerRecord(1, None)] == pytest.approx(math.sqrt(a * (1 - b)), abs=1e-15)
        assert norms[TimerRecord(None, 1)] == pytest.approx(math.sqrt((1 - a) * b), abs=1e-15)
        assert s1.dropped_weight == pytest.approx(a * b, abs=1e-18)

    def test_a_trigger_sets_control_zero(self):
        p = DecayParams(1.0, 1.0, 0.04, 1)
        phi = random_phi(3)
        g = haar_gates(5)
        s1 = step(initial_state(p, g, phi), g)
        ket = s1.branches[TimerRecord(1, None)].normalize()
        expected = tensor(basis(2, 0), g.u_a @ phi)
        assert abs(ket.inner(expected)) == pytest.approx(1.0, abs=1e-14)
        ket_b = s1.branches[TimerRecord(None, 1)].normalize()
        minus_b = tensor(Ket(np.array([1, -1]) / math.sqrt(2)), g.u_b @ phi)
        assert abs(ket_b.inner(minus_b)) == pytest.approx(1.0, abs=1e-14)

    def test_rejects_unnormalized_input(self):
        p = DecayParams(1.0, 1.0, 0.01, 1)
        s = initial_state(p, XZ, ZERO)
        bad = type(s)(p, {READY: s.branches[READY] * 2}, 0, 0.0)
        with pytest.raises(BookkeepingError):
            step(bad, XZ)


class TestEvolve:
    def test_one_step_matches_step(self):
        p = DecayParams(1.5, 0.5, 0.02, 1)
        g, phi = haar_gates(1), random_phi(2)
        e = evolve(p, g, phi)
        s = step(initial_state(p, g, phi), g)
        assert set(e.branches) == set(s.branches)
        for r in e.branches:
            np.testing.assert_array_equal(e.branches[r].amplitudes, s.branches[r].amplitudes)

    def test_branch_count(self):
        p = DecayParams(1.0, 2.0, 0.01, 17)
        assert len(evolve(p, XZ, ZERO).branches) == predicted_branch_count(17)

    def test_amplitude_of_first_ordered_pair(self):
        p = DecayParams(1.0, 3.0, 0.02, 4)
        a, b = p.dp_a, p.dp_b
        s = evolve(p, XZ, ZERO)
        got = math.sqrt(s.branches[TimerRecord(1, 2)].norm_sq())
        assert got == pytest.approx(math.sqrt(b) * (1 - b) ** 0.5 * math.sqrt(a), abs=1e-15)

    def test_five_line_accounting(self):
        # every branch amplitude equals the closed-form product of survival and jump amplitudes
        n = 25
        p = DecayParams(2.0, 0.7, 0.03, n)
        a, b = p.dp_a, p.dp_b
        s = evolve(p, XZ, ZERO)
        for rec, ket in s.branches.items():
            amp = math.sqrt(ket.norm_sq())
            ka, kb = rec.step_a, rec.step_b
            if rec.is_ready:
                want = survival_amplitude(a, n) * survival_amplitude(b, n)
            elif kb is None:
                want = survival_amplitude(b, n) * jump_amplitude(a, ka)
            elif ka is None:
                want = survival_amplitude(a, n) * jump_amplitude(b, kb)
            else:
                assert ka != kb
                want = jump_amplitude(a, ka) * jump_amplitude(b, kb)
            assert amp == pytest.approx(want, rel=1e-12)

    def test_control_flags(self):
        g, phi = haar_gates(11, d=3), random_phi(12, d=3)
        s = evolve(DecayParams(1.0, 1.3, 0.05, 20), g, phi)
        x = tensor(basis(2, 0), g.u_b @ (g.u_a @ phi))
        y = tensor(basis(2, 1), g.u_a @ (g.u_b @ phi))
        for rec, ket in s.branches.items():
            if rec.both_decayed:
                want = x if rec.a_first else y
                assert abs(ket.normalize().inner(want)) == pytest.approx(1.0, abs=1e-12)

    def test_total_weight_aggregated_long_run(self):
        agg = evolve_aggregated(DecayParams(1.0, 1.0, 1e-3, 1000), XZ, ZERO, track_history=True)
        total = agg.history.sum(axis=1)
        assert np.max(np.abs(total - 1)) <= 1e-10

    @given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.integers(0, 30), st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_weight_closes_every_step(self, ga, gb, n, seed):
        p = DecayParams(ga, gb, 0.05, n)
        g, phi = haar_gates(seed), random_phi(seed)
        s = initial_state(p, g, phi)
        for _ in range(n):
            s = step(s, g)
            assert abs(s.total_weight - 1) <= 1e-10

    def test_branch_cap(self, monkeypatch):
        p = DecayParams(1.0, 1.0, 0.01, 5)
        with pytest.raises(BranchOverflowError):
            evolve(p, XZ, ZERO, cap=10)
        monkeypatch.setenv("TSWITCH_MAX_BRANCHES", "20")
        with pytest.raises(BranchOverflowError):
            evolve(p, XZ, ZERO)
        monkeypatch.setenv("TSWITCH_MAX_BRANCHES", str(predicted_branch_count(5)))
        evolve(p, XZ, ZERO)

    def test_constant_schedule_matches_default(self):
        p = DecayParams(1.0, 2.0, 0.02, 30)
        s1 = evolve(p, XZ, ZERO)
        s2 = evolve(p, XZ, ZERO, schedule=lambda k: (p.dp_a, p.dp_b))
        assert order_probabilities(s1) == order_probabilities(s2)

    def test_schedule_out_of_range(self):
        with pytest.raises(DiscretizationError):
            evolve_aggregated(DecayParams(1.0, 1.0, 0.01, 3), XZ, ZERO, schedule=lambda k: (0.5, 0.0))


class TestAggregation:
    @pytest.mark.parametrize("ga,gb,n", [(1.0, 1.0, 200), (2.0, 1.0, 120), (0.4, 3.0, 60), (1.0, 0.0, 40)])
    def test_weights_match_enumeration(self, ga, gb, n):
        p = DecayParams(ga, gb, 0.02, n)
        g, phi = haar_gates(n), random_phi(n)
        e, a = evolve(p, g, phi), evolve_aggregated(p, g, phi)
        pe, pa = order_probabilities(e), order_probabilities(a)
        for f in ("p_a_first", "p_b_first", "p_incomplete", "p_coincident"):
            assert getattr(pe, f) == pytest.approx(getattr(pa, f), abs=1e-12)

    @pytest.mark.parametrize("ga,gb", [(1.0, 1.0), (2.0, 1.0)])
    @pytest.mark.parametrize("sym", [False, True])
    def test_reduced_state_matches_enumeration(self, ga, gb, sym):
        p = DecayParams(ga, gb, 0.05, 150)
        g, phi = haar_gates(3), random_phi(4)
        e, a = evolve(p, g, phi), evolve_aggregated(p, g, phi)
        if sym:
            e, a = symmetrize_timer(e), symmetrize_timer(a)
        re, ra = reduced_sc_state(e, 1e-3), reduced_sc_state(a, 1e-3)
        assert np.max(np.abs(re.entries - ra.entries)) <= 1e-12

    def test_reduced_state_matches_branch_sum_oracle(self):
        p = DecayParams(2.0, 1.0, 0.05, 150)
        g, phi = haar_gates(8), random_phi(9)
        for sym in (False, True):
            a = evolve_aggregated(p, g, phi)
            a = symmetrize_timer(a) if sym else a
            want = oracles.branch_sum_reduced_state(p.dp_a, p.dp_b, p.n_steps, g.u_a.entries, g.u_b.entries,
                                                    phi.amplitudes, symmetrize=sym)
            np.testing.assert_allclose(reduced_sc_state(a, 1e-3).entries, want, atol=1e-12)


class TestOrderProbabilities:
    def test_equal_rates_symmetric(self):
        pr = order_probabilities(evolve_aggregated(DecayParams(1.0, 1.0, 1e-3, 3000), XZ, ZERO))
        assert abs(pr.p_a_first - pr.p_b_first) <= 1e-10
        assert abs(pr.total - 1) <= 1e-10

    def test_unequal_rates_limit(self):
        dt = 1e-3
        p = DecayParams(2.0, 1.0, dt, 0).steps_for_incomplete(1e-6)
        pr = order_probabilities(evolve_aggregated(p, XZ, ZERO))
        assert abs(pr.p_a_first - 2 / 3) <= 3 * dt * 2
        brute, _ = oracles.order_double_sum(p.dp_a, p.dp_b, p.n_steps)
        assert pr.p_a_first == pytest.approx(brute, abs=1e-12)

    def test_zero_steps(self):
        pr = order_probabilities(evolve(DecayParams(1.0, 1.0, 0.01, 0), XZ, ZERO))
        assert pr.p_incomplete == pytest.approx(1.0, abs=1e-15)
        assert pr.p_a_first == pr.p_b_first == 0.0

    def test_symmetrized_enumeration_refuses(self):
        s = symmetrize_timer(evolve(DecayParams(1.0, 1.0, 0.05, 10), XZ, ZERO))
        with pytest.raises(ValueError):
            order_probabilities(s)

    def test_marginal_decay_law(self):
        # single-atom marginal from the two-atom evolution
        p = DecayParams(1.0, 2.5, 0.01, 400)
        h = evolve_aggregated(p, XZ, ZERO, track_history=True).history
        w_ee, w_a, w_b = h[:, 0], h[:, 1], h[:, 2]
        k = np.arange(1, p.n_steps + 1)
        np.testing.assert_allclose(1 - (w_ee + w_b), 1 - (1 - p.dp_a) ** k, atol=1e-12)
        np.testing.assert_allclose(1 - (w_ee + w_a), 1 - (1 - p.dp_b) ** k, atol=1e-12)


class TestReducedState:
    def test_ordered_xz(self):
        p = DecayParams(1.0, 1.0, 0.01, 1500)
        rho = reduced_sc_state(evolve_aggregated(p, XZ, ZERO))
        want = np.kron(np.eye(2) / 2, np.diag([0, 1]))
        np.testing.assert_allclose(rho.entries, want, atol=1e-12)

    def test_symmetrized_xz_is_pure_minus_one(self):
        p = DecayParams(1.0, 1.0, 0.01, 1500)
        rho = reduced_sc_state(symmetrize_timer(evolve_aggregated(p, XZ, ZERO)))
        v = np.kron(np.array([1, -1]) / math.sqrt(2), [0, 1])
        np.testing.assert_allclose(rho.entries, np.outer(v, v), atol=1e-12)

    def test_identity_gates(self):
        p = DecayParams(1.0, 1.0, 0.01, 1500)
        phi = random_phi(1)
        g = GateSet(identity(2), identity(2))
        pp = np.outer(phi.amplitudes, phi.amplitudes.conj())
        ordered = reduced_sc_state(evolve_aggregated(p, g, phi))
        np.testing.assert_allclose(ordered.entries, np.kron(np.eye(2) / 2, pp), atol=1e-12)
        sym = reduced_sc_state(symmetrize_timer(evolve_aggregated(p, g, phi)))
        np.testing.assert_allclose(sym.entries, np.kron(np.full((2, 2), 0.5), pp), atol=1e-12)

    def test_truncation_error(self):
        with pytest.raises(TruncationError, match="increase n_steps"):
            reduced_sc_state(evolve_aggregated(DecayParams(1.0, 1.0, 0.01, 300), XZ, ZERO))

    def test_span_check(self):
        with pytest.raises(TruncationError):
            reduced_sc_state(evolve_aggregated(DecayParams(1.0, 1.0, 0.01, 50), XZ, ZERO), threshold=1.0)


class TestContinuum:
    def test_deviation_small(self):
        assert discrete_continuum_check(DecayParams(1.0, 1.0, 1e-3, 5000)) < 5e-3

    def test_zero_rate(self):
        assert discrete_continuum_check(DecayParams(0.0, 0.0, 1e-2, 100)) == 0.0

    def test_first_order(self):
        dts = [4e-3, 2e-3, 1e-3]
        devs = [discrete_continuum_check(DecayParams(1.0, 1.0, dt, round(5 / dt))) for dt in dts]
        assert devs[0] / devs[1] == pytest.approx(2, rel=0.1)
        assert fit_convergence_order(dts, devs) == pytest.approx(1.0, abs=0.2)

    def test_cumulative_vs_exponential(self):
        dt, gamma = 1e-3, 1.0
        k = np.arange(0, 5001)
        gap = np.abs(cumulative_decay_probability(gamma * dt, k) - (1 - np.exp(-gamma * k * dt)))
        assert gap.max() <= 2 * gamma * dt
