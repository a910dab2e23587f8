from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import constant_path, rotation_path
from eigenpath import timedist as td
from eigenpath.apps.grover import GroverInstance, grover_gap, grover_path, grover_tracker
from eigenpath.paths import EigenpathTracker, uniform_parametrization
from eigenpath.qcore import random_hermitian, trace_norm
from eigenpath.traversal import (
    PlanRejected,
    TraversalPlan,
    cost_statistics,
    execute,
    plan_randomization,
    randomization_steps,
    zeno_baseline,
    zeno_steps,
)


def grover_setup(n=6):
    inst = GroverInstance(n)
    return inst, grover_path(inst), grover_tracker()


class TestStepCounts:
    def test_zeno_count(self):
        assert zeno_steps(np.pi / 2, 0.9) == 25

    def test_randomization_count(self):
        assert randomization_steps(np.pi / 2, 0.9) == 50

    @given(st.floats(0.01, 5), st.floats(0.01, 0.99))
    def test_randomization_doubles_zeno(self, length, p):
        exact = 2 * length**2 / (1 - p)
        assert randomization_steps(length, p) >= exact
        assert randomization_steps(length, p) < exact + 1


class TestZeno:
    def test_constant_path(self, rng, ground):
        path = constant_path(random_hermitian(4, rng))
        for q in (1, 3, 7):
            assert zeno_baseline(path, ground, q).final_fidelity == pytest.approx(1, abs=1e-12)

    def test_grover_subspace(self):
        inst, path, tracker = grover_setup()
        q = zeno_steps(np.pi / 2, 0.9)
        rep = zeno_baseline(path, tracker, q, initial=inst.plus_state())
        assert rep.final_fidelity >= 0.9

    def test_rotation_closed_form(self, ground):
        a, q = np.pi / 2, 25
        rep = zeno_baseline(rotation_path(a), ground, q)
        # two-level populations: p -> p cos^2 + (1 - p) sin^2 at each step
        oracle = 0.5 + 0.5 * np.cos(2 * a / q) ** q
        assert rep.final_fidelity == pytest.approx(oracle, abs=1e-6)
        assert rep.final_fidelity >= np.cos(a / q) ** (2 * q)
        assert rep.final_fidelity >= 0.9


class TestPlan:
    def test_q_from_declared_length(self):
        _, path, tracker = grover_setup()
        plan = plan_randomization(path, tracker, 0.9, grover_gap(0.5, 64), length_bound=np.pi / 2)
        assert plan.q == 50
        assert plan.error_target == pytest.approx(0.1 / 100)

    def test_compact_has_zero_error(self):
        _, path, tracker = grover_setup()
        plan = plan_randomization(path, tracker, 0.9, grover_gap(0.5, 64), "compact_optimal", True,
                                  length_bound=np.pi / 2)
        assert plan.repetitions == 1 and plan.step_error == 0.0
        assert isinstance(plan.distribution, td.CompactOptimal)

    def test_gaussian_positive_prescription(self):
        _, path, tracker = grover_setup()
        gap = grover_gap(0.5, 64)
        plan = plan_randomization(path, tracker, 0.9, gap, "gaussian", False, length_bound=np.pi / 2)
        dist = plan.distribution
        eps = plan.error_target
        assert dist.nonnegative and dist.support == "nonnegative-real"
        assert np.all(np.asarray(dist.sample(np.random.default_rng(0), 1000)) >= 0)
        assert plan.step_error <= eps
        # O(log(1/eps) / gap) per step
        assert dist.mean_abs() <= 10 * np.log(1 / eps) / gap
        assert dist.mean_abs() >= np.sqrt(np.log(1 / eps)) / gap

    def test_negative_family_without_permission(self):
        _, path, tracker = grover_setup()
        with pytest.raises(PlanRejected):
            plan_randomization(path, tracker, 0.9, 0.1, "compact_optimal", False, length_bound=np.pi / 2)

    def test_gap_floor_rejection_names_s(self):
        _, path, tracker = grover_setup()
        with pytest.raises(PlanRejected) as err:
            plan_randomization(path, tracker, 0.9, 0.5, length_bound=np.pi / 2)
        s = err.value.s
        assert s is not None and 0 < s < 0.5
        assert grover_gap(s, 64) < 0.5 <= grover_gap(s - 1 / 200, 64)

    def test_length_bound_below_length(self, ground):
        with pytest.raises(PlanRejected):
            plan_randomization(rotation_path(1.0), ground, 0.9, 2.0, length_bound=0.5)

    def test_invalid_plan_fields(self):
        d = td.CompactOptimal(1.0)
        with pytest.raises(ValueError):
            TraversalPlan(np.array([0.5, 0.4, 1.0]), d, 1, 0.9, 1.0, True, 1.0, 0.0, "compact_optimal")
        with pytest.raises(ValueError):
            TraversalPlan(np.array([0.5]), d, 1, 0.9, 1.0, True, 1.0, 0.0, "compact_optimal")
        with pytest.raises(ValueError):
            TraversalPlan(np.array([1.0]), d, 1, 0.9, 1.0, True, 1.0, 0.5, "compact_optimal")

    def test_subuniform_schedule(self, ground):
        plan = plan_randomization(rotation_path(0.7), ground, 0.8, 2.0, schedule="subuniform",
                                  length_bound=0.7)
        assert plan.q == randomization_steps(0.7, 0.8)
        np.testing.assert_allclose(plan.schedule, np.arange(1, plan.q + 1) / plan.q)


class TestExecute:
    def test_grover_exact(self):
        inst, path, tracker = grover_setup()
        plan = plan_randomization(path, tracker, 0.8, grover_gap(0.5, 64), length_bound=np.pi / 2)
        rep = execute(plan, path, tracker, inst.plus_state())
        assert rep.final_fidelity >= 0.8
        assert np.all((rep.step_fidelities >= 0) & (rep.step_fidelities <= 1 + 1e-12))

    def test_constant_path_cost_identity(self, rng, ground):
        path = constant_path(random_hermitian(3, rng))
        plan = plan_randomization(path, ground, 0.7, 0.05, length_bound=0.3)
        rep = execute(plan, path, ground)
        assert rep.final_fidelity == pytest.approx(1, abs=1e-12)
        assert rep.total_cost == plan.q * plan.repetitions * plan.distribution.mean_abs()

    def test_trajectories_match_exact(self):
        inst, path, tracker = grover_setup()
        plan = plan_randomization(path, tracker, 0.8, grover_gap(0.5, 64), length_bound=np.pi / 2)
        exact = execute(plan, path, tracker, inst.plus_state())
        traj = execute(plan.with_mode("trajectories", 2000, seed=5), path, tracker, inst.plus_state())
        assert abs(traj.final_fidelity - exact.final_fidelity) <= 3 * traj.fidelity_standard_error
        assert traj.final_fidelity >= 0.8 - 3 * traj.fidelity_standard_error

    def test_trajectories_seeded(self, ground):
        path = rotation_path(0.5)
        plan = plan_randomization(path, ground, 0.8, 2.0).with_mode("trajectories", 50, seed=3)
        a, b = execute(plan, path, ground), execute(plan, path, ground)
        np.testing.assert_array_equal(a.final_fidelities, b.final_fidelities)
        np.testing.assert_array_equal(a.cost_samples, b.cost_samples)

    def test_trajectory_prefix_stable(self, ground):
        path = rotation_path(0.5)
        plan = plan_randomization(path, ground, 0.8, 2.0)
        a = execute(plan.with_mode("trajectories", 20, seed=3), path, ground)
        b = execute(plan.with_mode("trajectories", 40, seed=3), path, ground)
        np.testing.assert_allclose(a.cost_samples, b.cost_samples[:20])

    @pytest.mark.parametrize("a", [0.3, 1.0, 2.0])
    @pytest.mark.parametrize("family,negative_ok", [("compact_optimal", True), ("sinc4", True),
                                                    ("gaussian", False), ("gaussian", True)])
    def test_fidelity_meets_target(self, ground, a, family, negative_ok):
        path = rotation_path(a)
        plan = plan_randomization(path, ground, 0.85, 2.0, family, negative_ok)
        assert execute(plan, path, ground).final_fidelity >= 0.85


class TestCostStatistics:
    def test_rejects_small_a(self, ground):
        plan = plan_randomization(rotation_path(0.5), ground, 0.8, 2.0)
        with pytest.raises(ValueError):
            cost_statistics(plan, 1.0)

    def test_plan_only(self, ground):
        plan = plan_randomization(rotation_path(0.5), ground, 0.8, 2.0)
        cs = cost_statistics(plan, 3.0)
        assert cs.mean_cost == plan.predicted_cost and cs.tail_bound == pytest.approx(1 / 3)
        assert cs.empirical_tail is None

    def test_deterministic_zero_tail(self, ground):
        path = rotation_path(0.5)
        plan = plan_randomization(path, ground, 0.8, 2.0)
        plan = replace(plan, distribution=td.PointMass(0.7), mode="trajectories", trajectories=100)
        cs = cost_statistics(execute(plan, path, ground), 1.01)
        assert cs.empirical_tail == 0.0 and cs.passed

    def test_grover_a2(self):
        inst, path, tracker = grover_setup()
        plan = plan_randomization(path, tracker, 0.8, grover_gap(0.5, 64), length_bound=np.pi / 2,
                                  mode="trajectories", trajectories=2000, seed=11)
        cs = cost_statistics(execute(plan, path, tracker, inst.plus_state()), 2.0)
        assert cs.empirical_tail <= 0.5 + 3 * cs.standard_error

    def test_gaussian_a4(self, ground):
        path = rotation_path(1.0)
        plan = plan_randomization(path, ground, 0.8, 2.0, "gaussian", False,
                                  mode="trajectories", trajectories=2000, seed=12)
        rep = execute(plan, path, ground)
        cs = cost_statistics(rep, 4.0)
        assert cs.empirical_tail <= 0.25 + 3 * cs.standard_error
        assert abs(rep.total_cost - plan.predicted_cost) <= 4 * np.std(rep.cost_samples) / np.sqrt(2000)


class TestPipeline:
    @pytest.mark.parametrize("family,negative_ok", [("compact_optimal", True), ("gaussian", False),
                                                    ("binomial", True)])
    def test_deviation_from_witness_zeno(self, ground, family, negative_ok):
        path = rotation_path(1.2)
        plan = plan_randomization(path, ground, 0.8, 2.0, family, negative_ok)
        rand = execute(plan, path, ground)
        zeno = zeno_baseline(path, ground, plan.q, schedule=plan.schedule,
                             witness=plan.step_distribution)
        assert trace_norm(rand.final_density - zeno.final_density) <= plan.q * plan.step_error + 1e-9

    def test_compact_matches_projections(self):
        inst, path, tracker = grover_setup()
        plan = plan_randomization(path, tracker, 0.8, grover_gap(0.5, 64), length_bound=np.pi / 2)
        rand = execute(plan, path, tracker, inst.plus_state())
        zeno = zeno_baseline(path, tracker, plan.q, inst.plus_state(), schedule=plan.schedule)
        np.testing.assert_allclose(rand.step_fidelities, zeno.step_fidelities, atol=1e-9)

    @pytest.mark.parametrize("a", [0.5, 1.5])
    def test_doubling_q(self, ground, a):
        path = rotation_path(a)
        plan = plan_randomization(path, ground, 0.8, 2.0)
        base = execute(plan, path, ground).final_fidelity
        for q in (2 * plan.q, 4 * plan.q):
            finer = replace(plan, schedule=uniform_parametrization(path, ground.copy(), q))
            fid = execute(finer, path, ground).final_fidelity
            assert fid >= base - 1e-12
            base = fid

    def test_unitary_path_uniform_int(self, rng):
        from eigenpath.paths import OperatorPath
        from eigenpath.qcore import expm_hermitian

        def u(s):
            return expm_hermitian(-(np.cos(s) * np.diag([1.0, -1.0]) + np.sin(s) * np.array([[0, 1], [1, 0]])), -1.0)

        path = OperatorPath(u, kind="unitary", name="rotating-unitary")
        tracker = EigenpathTracker(rule="reference",
                                   reference=lambda s: np.array([np.cos(s / 2), np.sin(s / 2)]))
        plan = plan_randomization(path, tracker, 0.8, 2.0, "uniform_int", False)
        assert plan.repetitions == int(np.ceil(np.log2(1 / plan.error_target)))
        assert execute(plan, path, tracker).final_fidelity >= 0.8
