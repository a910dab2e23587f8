"""Planning and executing the randomization method along an eigenpath.

A plan fixes q points s_1 < ... < s_q = 1 and a time distribution per step.
At each point the system evolves under the path operator for a random time
(repeated ``repetitions`` times), which dephases the tracked eigenstate from
the rest of the spectrum. ``execute`` runs the plan either as an exact
channel on density matrices or as seeded pure-state trajectories.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    projective_measurement_op,
    randomized_evolution_exact,
)
from .paths import (
    ArcLengthTable,
    EigenpathTracker,
    OperatorPath,
    build_arc_length_table,
    subuniform_schedule,
    track,
    uniform_parametrization,
)
from .qcore import check_state, eigendecompose, fidelity, pure_density, unitary_eigensystem
from .timedist import (
    Binomial,
    CompactOptimal,
    Repeated,
    Sinc4,
    TimeDistribution,
    UniformInt,
    discretize_to_integers,
    gaussian_for_error,
)

FAMILIES = ("compact_optimal", "sinc4", "gaussian", "uniform_int", "binomial")


class PlanRejected(ValueError):
    """The requested plan cannot meet its premises (e.g. the gap floor)."""

    def __init__(self, message: str, s: float | None = None):
        super().__init__(message)
        self.s = s


def zeno_steps(length_bound: float, p: float, d: float = 1.0) -> int:
    """q = ceil(L'^2 d^2 / (1 - p)) for ideal projective measurements."""
    return max(1, math.ceil(length_bound**2 * d**2 / (1 - p)))


def randomization_steps(length_bound: float, p: float) -> int:
    """q = ceil(2 L'^2 / (1 - p)) for randomized evolutions."""
    return max(1, math.ceil(2 * length_bound**2 / (1 - p)))


@dataclass(frozen=True)
class TraversalPlan:
    schedule: np.ndarray
    distribution: TimeDistribution
    repetitions: int
    p: float
    gap_floor: float
    negative_ok: bool
    length_bound: float
    step_error: float
    family: str
    schedule_kind: str = "uniform"
    mode: str = "exact"
    trajectories: int = 2000
    seed: int = 0

    def __post_init__(self):
        s = np.asarray(self.schedule, dtype=float)
        object.__setattr__(self, "schedule", s)
        if s.size == 0 or np.any(np.diff(s) <= 0) or s[0] <= 0 and s.size > 1:
            raise ValueError("schedule must be strictly increasing in (0, 1]")
        if abs(s[-1] - 1.0) > 1e-12:
            raise ValueError("schedule must end at s = 1")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if self.mode not in ("exact", "trajectories"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.step_error > self.error_target * (1 + 1e-9):
            raise ValueError(
                f"per-step error {self.step_error:.3g} exceeds target {self.error_target:.3g}")

    @property
    def q(self) -> int:
        return len(self.schedule)

    @property
    def error_target(self) -> float:
        return (1 - self.p) / (2 * self.q)

    @property
    def step_distribution(self) -> TimeDistribution:
        """Total time spent at one schedule point (n repetitions combined)."""
        if self.repetitions == 1:
            return self.distribution
        return Repeated(self.distribution, self.repetitions)

    @property
    def predicted_cost(self) -> float:
        return self.q * self.repetitions * self.distribution.mean_abs()

    def with_mode(self, mode: str, trajectories: int | None = None, seed: int | None = None):
        from dataclasses import replace

        return replace(self, mode=mode,
                       trajectories=self.trajectories if trajectories is None else trajectories,
                       seed=self.seed if seed is None else seed)

    def to_record(self) -> dict:
        return {
            "q": self.q,
            "schedule": [float(x) for x in self.schedule],
            "distribution": self.distribution.to_spec(),
            "repetitions": int(self.repetitions),
            "p": self.p,
            "gap_floor": self.gap_floor,
            "negative_ok": self.negative_ok,
            "length_bound": self.length_bound,
            "step_error": self.step_error,
            "error_target": self.error_target,
            "family": self.family,
            "schedule_kind": self.schedule_kind,
            "mode": self.mode,
            "trajectories": self.trajectories,
            "seed": self.seed,
            "predicted_cost": self.predicted_cost,
        }


@dataclass
class TraversalReport:
    final_fidelity: float
    step_fidelities: np.ndarray
    total_cost: float
    schedule: np.ndarray
    mode: str
    final_density: np.ndarray
    cost_samples: np.ndarray | None = None
    final_fidelities: np.ndarray | None = None
    plan: TraversalPlan | None = None
    elapsed: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def fidelity_standard_error(self) -> float:
        if self.final_fidelities is None or len(self.final_fidelities) < 2:
            return 0.0
        return float(np.std(self.final_fidelities, ddof=1) / np.sqrt(len(self.final_fidelities)))

    def to_record(self) -> dict:
        rec = {
            "mode": self.mode,
            "final_fidelity": self.final_fidelity,
            "total_cost": self.total_cost,
            "q": len(self.schedule),
            "elapsed_seconds": self.elapsed,
        }
        if self.final_fidelities is not None:
            rec["trajectories"] = len(self.final_fidelities)
            rec["fidelity_standard_error"] = self.fidelity_standard_error
            rec["cost_mean"] = float(np.mean(self.cost_samples))
        if self.plan is not None:
            rec["plan"] = self.plan.to_record()
        rec.update(self.extra)
        return rec


def _targets(path: OperatorPath, tracker: EigenpathTracker, schedule) -> tuple[np.ndarray, list]:
    """Tracked eigenstates at 0 and at every schedule point."""
    pts = np.concatenate([[0.0], np.asarray(schedule, dtype=float)])
    states = track(path, tracker.copy(), pts)
    return states[0].state, states[1:]


def zeno_baseline(
    path: OperatorPath,
    tracker: EigenpathTracker,
    q: int,
    initial=None,
    schedule=None,
    witness: TimeDistribution | None = None,
) -> TraversalReport:
    """Ideal projective-measurement operations at q points.

    ``witness`` selects the complement map: the identity by default, or the
    randomized evolution under ``witness`` restricted to the complement.
    """
    start = time.perf_counter()
    if schedule is None:
        schedule = uniform_parametrization(path, tracker.copy(), q)
    schedule = np.asarray(schedule, dtype=float)
    psi0, targets = _targets(path, tracker, schedule)
    rho = pure_density(psi0 if initial is None else check_state(initial))
    fids = []
    for s, tgt in zip(schedule, targets):
        comp = None
        if witness is not None:
            comp = randomized_evolution_exact(path(s), witness, path.kind)
        rho = projective_measurement_op(pure_density(tgt.state), comp)(rho)
        fids.append(fidelity(tgt.state, rho))
    fids = np.array(fids)
    return TraversalReport(float(fids[-1]), fids, 0.0, schedule, "zeno", rho,
                           elapsed=time.perf_counter() - start)


def _family_distribution(family: str, gap: float, eps: float, negative_ok: bool,
                         kind: str) -> tuple[TimeDistribution, int, float]:
    """Distribution, repetitions and guaranteed per-step error for a family."""
    unitary = kind == "unitary"
    if unitary:
        gap = min(gap, np.pi)
    if family in ("compact_optimal", "sinc4"):
        if not negative_ok:
            raise PlanRejected(f"{family} needs negative evolution times")
        dist = CompactOptimal(gap) if family == "compact_optimal" else Sinc4(gap / 4)
        if unitary:
            dist = discretize_to_integers(dist)
        return dist, 1, 0.0
    if family == "gaussian":
        if unitary:
            raise PlanRejected("gaussian times are not integers; use uniform_int or binomial")
        dist = gaussian_for_error(eps, gap, positive=not negative_ok)
        return dist, 1, dist.error_bound(gap)
    if family == "uniform_int":
        if not unitary:
            raise PlanRejected("uniform_int only dephases phases modulo 2 pi; use a unitary path")
        Q = math.ceil(2 * np.pi / gap)
        shift = -(Q // 2) if negative_ok else 0
        n = max(1, math.ceil(math.log2(1 / eps)))
        return UniformInt(Q, shift), n, 0.5**n
    if family == "binomial":
        m = max(1, math.ceil(4 * math.log(1 / eps) / gap**2))
        # cos(w/2)^{2m} revives at w = 2 pi, so Hamiltonian spectra must stay narrower
        return Binomial(m, 0 if negative_ok else m), 1, float(math.exp(-m * gap**2 / 4))
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def verify_gap_floor(path: OperatorPath, tracker: EigenpathTracker, gap_floor: float,
                     points) -> float:
    """Minimum tracked gap over ``points``; rejects the first point below the floor."""
    states = track(path, tracker.copy(), np.asarray(points, dtype=float))
    gaps = np.array([st.gap for st in states])
    bad = np.nonzero(gaps < gap_floor * (1 - 1e-12))[0]
    if bad.size:
        s = float(points[bad[0]])
        raise PlanRejected(f"gap floor {gap_floor:.6g} exceeds the gap {gaps[bad[0]]:.6g} at s={s:.6g}", s)
    return float(gaps.min())


def plan_randomization(
    path: OperatorPath,
    tracker: EigenpathTracker,
    p: float,
    gap_floor: float,
    family: str = "compact_optimal",
    negative_ok: bool = True,
    *,
    length_bound: float | None = None,
    schedule: str = "uniform",
    hdot_bound: float | None = None,
    table: ArcLengthTable | None = None,
    gap_samples: int = 201,
    mode: str = "exact",
    trajectories: int = 2000,
    seed: int = 0,
) -> TraversalPlan:
    """Choose q and the per-step time distribution for target fidelity ``p``.

    ``schedule="uniform"`` places points at equal arc length of the tracked
    eigenpath; ``length_bound`` (>= the numeric length) then fixes q.
    ``schedule="subuniform"`` uses s_j = j/q with L' = hdot_bound / gap_floor.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if not gap_floor > 0:
        raise ValueError("gap floor must be positive")

    if schedule == "uniform":
        if table is None:
            table = build_arc_length_table(path, tracker.copy())
        length = table.total
        if length_bound is None:
            length_bound = length
        elif length_bound < length - 1e-6:
            raise PlanRejected(f"length bound {length_bound:.6g} is below the path length {length:.6g}")
        q = randomization_steps(length_bound, p)
        points = uniform_parametrization(path, tracker.copy(), q, table=table)
    elif schedule == "subuniform":
        if length_bound is None:
            hdot = hdot_bound if hdot_bound is not None else path.hdot_bound()
            length_bound = hdot / gap_floor
            q = randomization_steps(length_bound, p)
            points = subuniform_schedule(path, gap_floor, hdot, q).schedule
        else:
            q = randomization_steps(length_bound, p)
            points = np.arange(1, q + 1) / q
    else:
        raise ValueError(f"unknown schedule kind {schedule!r}")

    check_pts = np.union1d(np.linspace(0.0, 1.0, gap_samples), points)
    verify_gap_floor(path, tracker, gap_floor, check_pts)

    eps = (1 - p) / (2 * q)
    dist, n, step_error = _family_distribution(family, gap_floor, eps, negative_ok, path.kind)
    return TraversalPlan(points, dist, n, p, gap_floor, negative_ok, float(length_bound),
                         float(step_error), family, schedule, mode, trajectories, seed)


def _evolve_batch(psis, v, freqs, t):
    """Rows of ``psis`` evolved for per-row times ``t`` under V diag(e^{i f t}) V^+."""
    coeffs = psis @ v.conj()
    coeffs *= np.exp(1j * np.outer(t, freqs))
    return coeffs @ v.T


def execute(
    plan: TraversalPlan,
    path: OperatorPath,
    tracker: EigenpathTracker,
    initial=None,
) -> TraversalReport:
    """Run ``plan`` and report fidelities against the tracked eigenstates."""
    start = time.perf_counter()
    psi0, targets = _targets(path, tracker, plan.schedule)
    psi0 = psi0 if initial is None else check_state(initial)
    step_dist = plan.step_distribution

    if plan.mode == "exact":
        rho = pure_density(psi0)
        fids = []
        for s, tgt in zip(plan.schedule, targets):
            rho = randomized_evolution_exact(path(s), step_dist, path.kind)(rho)
            fids.append(fidelity(tgt.state, rho))
        fids = np.array(fids)
        return TraversalReport(float(fids[-1]), fids, plan.predicted_cost, plan.schedule,
                               "exact", rho, plan=plan, elapsed=time.perf_counter() - start)

    k_traj, q, n = plan.trajectories, plan.q, plan.repetitions
    times = np.empty((k_traj, q, n))
    for k in range(k_traj):
        # counter-based stream: trajectory k sees the same draws in any execution order
        rng = np.random.default_rng([plan.seed, k])
        times[k] = np.asarray(plan.distribution.sample(rng, (q, n)), dtype=float)
    costs = np.abs(times).sum(axis=(1, 2))
    psis = np.tile(psi0, (k_traj, 1))
    mean_fids = np.empty(q)
    for j, (s, tgt) in enumerate(zip(plan.schedule, targets)):
        op = path(s)
        if path.kind == "unitary":
            es = unitary_eigensystem(op)
            freqs = es.eigenvalues
        else:
            es = eigendecompose(op)
            freqs = -es.eigenvalues
        psis = _evolve_batch(psis, es.eigenvectors, freqs, times[:, j, :].sum(axis=1))
        mean_fids[j] = float(np.mean(np.abs(psis @ tgt.state.conj()) ** 2))
    final = np.abs(psis @ targets[-1].state.conj()) ** 2
    rho = psis.T @ psis.conj() / k_traj
    return TraversalReport(float(final.mean()), mean_fids, float(costs.mean()), plan.schedule,
                           "trajectories", rho, cost_samples=costs, final_fidelities=final,
                           plan=plan, elapsed=time.perf_counter() - start)


@dataclass(frozen=True)
class CostStatistics:
    mean_cost: float
    tail_bound: float
    empirical_tail: float | None
    standard_error: float | None
    passed: bool | None


def cost_statistics(source: TraversalReport | TraversalPlan, a: float) -> CostStatistics:
    """Markov tail check: P(C >= a <C>) <= 1/a."""
    if a <= 1:
        raise ValueError("a must exceed 1")
    plan = source if isinstance(source, TraversalPlan) else source.plan
    if plan is None:
        raise ValueError("report carries no plan")
    mean_cost = plan.predicted_cost
    tail_bound = 1.0 / a
    samples = getattr(source, "cost_samples", None)
    if samples is None:
        return CostStatistics(mean_cost, tail_bound, None, None, None)
    samples = np.asarray(samples)
    empirical = float(np.mean(samples >= a * mean_cost))
    se = math.sqrt(tail_bound * (1 - tail_bound) / len(samples))
    return CostStatistics(mean_cost, tail_bound, empirical, se, bool(empirical <= tail_bound + 3 * se))
