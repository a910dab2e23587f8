import numpy as np
import pytest

from eigenpath.apps.grover import GroverInstance, grover_path, grover_tracker
from eigenpath.paths import (
    DegeneracyError,
    EigenpathTracker,
    OperatorPath,
    TrackingLostError,
    build_arc_length_table,
    derivative_bound_check,
    eigenstate_at,
    linear_path,
    path_length,
    path_length_refinements,
    subuniform_schedule,
    track,
    uniform_parametrization,
)
from eigenpath.qcore import angular_distance, random_hermitian, random_unitary

from conftest import constant_path, rotation_path


def grover(n, representation="full"):
    return grover_path(GroverInstance(n, representation=representation)), grover_tracker()


class TestEigenstateAt:
    def test_grover_start_is_plus(self):
        path, tr = grover(3)
        st = eigenstate_at(path, tr, 0.0)
        assert angular_distance(st.state, np.full(8, 1 / np.sqrt(8))) <= 1e-12

    def test_grover_end_is_marked(self):
        path, tr = grover(3)
        st = eigenstate_at(path, tr, 1.0)
        assert angular_distance(st.state, np.eye(8)[0]) <= 1e-12

    def test_grover_gap_at_half(self):
        path, tr = grover(2)
        assert eigenstate_at(path, tr, 0.5).gap == pytest.approx(0.5, abs=1e-12)

    def test_returns_eigenvector(self, rng, ground):
        path = linear_path(random_hermitian(5, rng), random_hermitian(5, rng))
        st = eigenstate_at(path, ground, 0.3)
        h = path(0.3)
        assert np.linalg.norm(h @ st.state - st.energy * st.state) <= 1e-10

    def test_phase_convention(self, rng, ground):
        path = linear_path(random_hermitian(4, rng), random_hermitian(4, rng))
        states = track(path, ground, np.linspace(0, 1, 50))
        for a, b in zip(states, states[1:]):
            c = np.vdot(a.state, b.state)
            assert abs(c.imag) <= 1e-12 and c.real > 0

    def test_degenerate_level(self):
        path = constant_path(np.diag([0.0, 0.0, 1.0]))
        with pytest.raises(DegeneracyError):
            eigenstate_at(path, EigenpathTracker(rule="smallest"), 0.5)

    def test_tracking_lost(self):
        path = constant_path(np.diag([0.0, 1.0]))
        tr = EigenpathTracker(rule="smallest", threshold=0.9)
        with pytest.raises(TrackingLostError):
            eigenstate_at(path, tr, 0.5, prev=np.array([1, 1]) / np.sqrt(2))

    def test_unitary_path_gap_is_wrapped(self):
        u = np.diag(np.exp(1j * np.array([3.0, -3.0])))
        path = OperatorPath(lambda s: u, kind="unitary")
        st = eigenstate_at(path, EigenpathTracker(rule="index", index=0), 0.0)
        assert st.gap == pytest.approx(2 * np.pi - 6.0)

    def test_reference_rule_projects_cluster(self):
        h = np.diag([0.0, 0.0, 1.0])
        path = constant_path(h)
        ref = np.array([0.6, 0.8, 0.0])
        st = eigenstate_at(path, EigenpathTracker(rule="reference", reference=ref), 0.2)
        assert angular_distance(st.state, ref) <= 1e-12
        assert st.gap == pytest.approx(1.0)

    def test_rejects_s_out_of_range(self, ground):
        with pytest.raises(ValueError):
            eigenstate_at(rotation_path(1.0), ground, 1.5)


class TestPathLength:
    def test_constant(self, ground):
        assert path_length(constant_path(np.diag([0.0, 1.0])), ground) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("a", [0.3, 1.0, np.pi / 2])
    def test_rotation(self, a, ground):
        assert path_length(rotation_path(a), ground) == pytest.approx(a, abs=1e-6)

    def test_grover_1024(self):
        path, tr = grover(10, "subspace")
        assert abs(path_length(path, tr) - np.pi / 2) <= 0.08

    def test_refinements_nondecreasing(self, rng, ground):
        path = linear_path(random_hermitian(4, rng), random_hermitian(4, rng))
        est = path_length_refinements(path, ground, levels=8)
        assert np.all(np.diff(est) >= -1e-12)

    def test_table_monotone_and_converged(self, rng, ground):
        path = linear_path(random_hermitian(4, rng), random_hermitian(4, rng))
        table = build_arc_length_table(path, ground)
        assert table.converged
        assert np.all(np.diff(table.lengths) >= 0)

    def test_length_below_derivative_over_gap(self, rng, ground):
        for _ in range(5):
            path = linear_path(random_hermitian(3, rng), random_hermitian(3, rng))
            gaps = [st.gap for st in track(path, ground.copy(), np.linspace(0, 1, 401))]
            lb = subuniform_schedule(path, min(gaps), None, 1).length_bound
            assert path_length(path, ground.copy()) <= lb + 1e-6


class TestUniformParametrization:
    def test_rotation_equally_spaced(self, ground):
        s = uniform_parametrization(rotation_path(1.2), ground, 8)
        np.testing.assert_allclose(s, np.arange(1, 9) / 8, atol=1e-6)

    def test_single_point(self, ground):
        np.testing.assert_array_equal(uniform_parametrization(rotation_path(1.0), ground, 1), [1.0])

    def test_equal_increments(self, rng, ground):
        path = linear_path(random_hermitian(4, rng), random_hermitian(4, rng))
        tol = 1e-6
        s = np.concatenate([[0.0], uniform_parametrization(path, ground.copy(), 10, tol=tol)])
        inc = [build_arc_length_table(path, ground.copy(), tol, s_range=(a, b)).total
               for a, b in zip(s, s[1:])]
        assert max(inc) / min(inc) <= 1 + 10 * tol

    def test_grover_closed_form(self):
        n = 8
        path, tr = grover(n)
        q = 8
        table = build_arc_length_table(path, tr)
        s = uniform_parametrization(path, tr, q, table=table)
        delta = table.total / q
        j = np.arange(1, q)
        approx = 0.5 - 1 / np.tan(2 * j * delta) / (2 * np.sqrt(2**n))
        assert np.max(np.abs(s[:-1] - np.clip(approx, 0, 1))) <= 0.02

    def test_rejects_unconverged_table(self, ground):
        path = rotation_path(1.0)
        table = build_arc_length_table(path, ground, max_depth=0, initial_segments=1, tol=1e-12)
        if not table.converged:
            with pytest.raises(ValueError):
                uniform_parametrization(path, ground, 4, table=table)


class TestSubuniform:
    def test_linear_hdot(self, rng):
        a, b = random_hermitian(4, rng), random_hermitian(4, rng)
        path = linear_path(a, b)
        assert path.hdot_bound() == pytest.approx(np.linalg.norm(b - a, 2), rel=1e-12)

    def test_grover_length_bound(self):
        n = 6
        path, _ = grover(n)
        sch = subuniform_schedule(path, 1 / np.sqrt(2**n), path.hdot_bound(), 5)
        assert path.hdot_bound() <= 1 + 1e-12
        assert sch.length_bound == pytest.approx(np.sqrt(2**n) * path.hdot_bound())
        np.testing.assert_allclose(sch.schedule, np.arange(1, 6) / 5)

    def test_single_step(self):
        np.testing.assert_array_equal(subuniform_schedule(None, 0.5, 1.0, 1).schedule, [1.0])

    def test_rejects_nonpositive_gap(self):
        with pytest.raises(ValueError):
            subuniform_schedule(None, 0.0, 1.0, 3)


class TestDerivativeBound:
    def test_constant(self, ground):
        chk = derivative_bound_check(constant_path(np.diag([0.0, 1.0])), ground, 0.5)
        assert chk.lhs == pytest.approx(0.0, abs=1e-9) and chk.passed

    def test_grover_midpoint(self):
        path, tr = grover(4)
        assert derivative_bound_check(path, tr, 0.5).passed

    def test_random_two_parameter_path(self, rng, ground):
        a, b, c = (random_hermitian(5, rng) for _ in range(3))
        path = OperatorPath(lambda s: (1 - s) * a + s * b + s * (1 - s) * c,
                            lambda s: b - a + (1 - 2 * s) * c)
        for s in np.linspace(0.02, 0.98, 20):
            assert derivative_bound_check(path, ground.copy(), s).passed

    def test_rotation_is_tight(self, ground):
        # |d psi| = a and |dH| / gap = 2a / 2
        chk = derivative_bound_check(rotation_path(0.8), ground, 0.4)
        assert chk.lhs == pytest.approx(0.8, rel=1e-6)
        assert chk.rhs == pytest.approx(0.8, rel=1e-9)


def test_unitary_path_requires_unitary(rng):
    path = OperatorPath(lambda s: 2 * random_unitary(3, rng), kind="unitary")
    with pytest.raises(ValueError):
        path(0.5)
