import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from eigenpath.apps.annealing import (
    AnnealingInstance,
    chain_gap,
    check_detailed_balance,
    discriminant,
    gibbs_derivative_check,
    gibbs_path,
    gibbs_state,
    metropolis_matrix,
    qsa_path_length_bound,
    random_instance,
    run_qsa,
    szegedy_walk,
    two_state_length,
    walk_length_bound,
    walk_path,
    walk_spectrum_check,
    walk_stationary_state,
)
from eigenpath.paths import EigenpathTracker, path_length
from eigenpath.qcore import check_unitary


energies_st = st.lists(st.integers(0, 4), min_size=2, max_size=7).map(lambda e: np.array(e, float))


class TestChain:
    @settings(max_examples=40, deadline=None)
    @given(energies_st, st.floats(0, 8), st.sampled_from(["complete", "ring"]),
           st.sampled_from([0.5, 0.25, 1.0]))
    def test_invariants(self, e, beta, proposal, laziness):
        inst = AnnealingInstance(e, beta_final=1.0, proposal=proposal, laziness=laziness)
        p, pi = inst.transition_matrix(beta), inst.stationary(beta)
        assert np.all(p >= -1e-15)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(pi @ p, pi, atol=1e-10)
        check_detailed_balance(p, pi)

    def test_discriminant_top_vector(self, rng):
        inst = random_instance(6, rng)
        p, pi = inst.transition_matrix(1.3), inst.stationary(1.3)
        d = discriminant(p, pi)
        np.testing.assert_allclose(d @ np.sqrt(pi), np.sqrt(pi), atol=1e-12)

    def test_default_beta_final(self):
        inst = AnnealingInstance(np.array([0.0, 2.0, 2.0, 3.0]))
        assert inst.beta_final == math.ceil(math.log(40) / 2)

    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            AnnealingInstance(np.array([1.0]))
        with pytest.raises(ValueError):
            AnnealingInstance(np.array([0.0, 1.0]), laziness=0.0)
        with pytest.raises(ValueError):
            metropolis_matrix([0.0, 1.0], 1.0, proposal="star")


class TestGibbs:
    def test_infinite_temperature(self, rng):
        amp = gibbs_state(random_instance(5, rng), 0.0).amplitudes
        np.testing.assert_allclose(amp, np.full(5, 1 / math.sqrt(5)), atol=1e-15)

    def test_concentrates(self, rng):
        inst = random_instance(6, rng)
        g = inst.ground_configurations()
        for beta in (2.0, 5.0, 10.0):
            fid = gibbs_state(inst, beta).distribution[g].sum()
            assert fid >= 1 - inst.d * math.exp(-beta * inst.energy_gap)

    def test_normalized(self):
        inst = random_instance(16, np.random.default_rng(7))
        for beta in np.linspace(0, 6, 20):
            amp = gibbs_state(inst, beta).amplitudes
            assert np.linalg.norm(amp) == pytest.approx(1, abs=1e-14) and np.all(amp >= 0)

    def test_rejects_negative_beta(self, rng):
        with pytest.raises(ValueError):
            gibbs_state(random_instance(3, rng), -1.0)


class TestDerivative:
    def test_two_state(self):
        chk = gibbs_derivative_check(AnnealingInstance(np.array([0.0, 1.0])), 1.0)
        p1 = math.exp(-1) / (1 + math.exp(-1))
        assert chk.rhs == pytest.approx(math.sqrt(p1 * (1 - p1)) / 2, abs=1e-14)
        assert chk.passed

    def test_sixteen_states(self):
        inst = random_instance(16, np.random.default_rng(7))
        for beta in np.linspace(0.2, 6, 10):
            assert gibbs_derivative_check(inst, beta).passed

    def test_flat(self):
        chk = gibbs_derivative_check(AnnealingInstance(np.full(4, 2.0)), 1.0)
        assert chk.lhs == 0.0 and chk.rhs == 0.0 and chk.passed


class TestLength:
    def test_flat(self):
        length, bound = qsa_path_length_bound(AnnealingInstance(np.full(3, 1.0), beta_final=2.0))
        assert length == pytest.approx(0, abs=1e-12) and bound == 0.0

    def test_sixteen_states(self):
        length, bound = qsa_path_length_bound(random_instance(16, np.random.default_rng(7)))
        assert 0 < length <= bound

    def test_two_state_closed_form(self):
        bf = 3.0
        inst = AnnealingInstance(np.array([0.0, 1.0]), beta_final=bf)
        oracle = quad(lambda b: inst.sigma(b) / 2, 0, bf, epsabs=1e-12)[0]
        assert two_state_length(bf) == pytest.approx(oracle, abs=1e-9)
        numeric = path_length(gibbs_path(inst), EigenpathTracker(rule="smallest"))
        assert numeric == pytest.approx(oracle, abs=1e-6)

    def test_walk_length_bound_covers_numeric(self, rng):
        inst = random_instance(5, rng, beta_final=3.0)
        path, tracker = walk_path(inst)
        assert path_length(path, tracker, 1e-5) <= walk_length_bound(inst)

    def test_walk_length_bound_needs_laziness(self, rng):
        with pytest.raises(ValueError):
            walk_length_bound(random_instance(4, rng, laziness=1.0))


class TestSzegedy:
    def test_two_state_symmetric(self):
        p, pi = np.full((2, 2), 0.5), np.full(2, 0.5)
        chk = walk_spectrum_check(p, pi)
        np.testing.assert_allclose(np.sort(chk.discriminant_eigenvalues), [0, 1], atol=1e-15)
        assert chk.phase_gap == pytest.approx(np.pi / 2, abs=1e-12)
        assert chk.max_mismatch <= 1e-8

    def test_eight_state(self, rng):
        inst = random_instance(8, rng)
        p, pi = inst.transition_matrix(2.0), inst.stationary(2.0)
        w = szegedy_walk(p, pi)
        check_unitary(w, atol=1e-10)
        assert walk_spectrum_check(p, pi).max_mismatch <= 1e-8
        v = walk_stationary_state(p, pi)
        np.testing.assert_allclose(w @ v, v, atol=1e-12)
        # system marginal of V sqrt(pi) is the Gibbs distribution
        marg = np.sum(np.abs(v.reshape(8, 8)) ** 2, axis=1)
        np.testing.assert_allclose(marg, pi, atol=1e-14)

    def test_phase_gap_boost(self):
        rng = np.random.default_rng(99)
        for _ in range(20):
            d = int(rng.integers(2, 9))
            inst = random_instance(d, rng, proposal=str(rng.choice(["complete", "ring"])),
                                   laziness=float(rng.uniform(0.05, 1.0)))
            beta = float(rng.uniform(0, 4))
            p, pi = inst.transition_matrix(beta), inst.stationary(beta)
            chk = walk_spectrum_check(p, pi)
            gamma = chain_gap(p, pi)
            assert chk.max_mismatch <= 1e-8
            assert chk.phase_gap >= math.sqrt(2 * gamma) - 1e-8

    def test_rejects_irreversible(self):
        p = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        with pytest.raises(ValueError):
            szegedy_walk(p, np.full(3, 1 / 3))
        with pytest.raises(ValueError):
            discriminant(p, np.full(3, 1 / 3))


class TestRun:
    def test_eight_state(self):
        inst = random_instance(8, np.random.default_rng(1))
        assert len(inst.ground_configurations()) == 1
        plan, rep = run_qsa(inst, 0.8)
        assert rep.final_fidelity >= 0.8
        assert rep.extra["ground_probability"] >= rep.extra["gibbs_ground_probability"] - 0.05
        assert sum(rep.extra["configuration_distribution"]) == pytest.approx(1, abs=1e-10)
        assert rep.extra["walk_applications"] == pytest.approx(plan.predicted_cost)

    def test_flat(self):
        plan, rep = run_qsa(AnnealingInstance(np.zeros(3), beta_final=1.0), 0.7)
        assert rep.final_fidelity == pytest.approx(1, abs=1e-10)
