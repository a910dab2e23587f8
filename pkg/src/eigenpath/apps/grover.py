"""Unstructured search as eigenpath traversal.

H(s) = -[s P_S + (1 - s)|+><+|] with P_S the projector onto the marked
items. The traversal follows the ground state of H(s), which rotates from
|+> to the marked state. For a single marked item the invariant plane is
span{|+>, |S>} and the relevant gap is sqrt(1 - 4 s (1 - s)(1 - 1/N)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..channels import randomized_evolution_exact
from ..paths import EigenpathTracker, OperatorPath
from ..qcore import eigendecompose, fidelity, pure_density
from ..timedist import TwoPoint
from ..traversal import TraversalPlan, TraversalReport, execute, plan_randomization

FULL_SPACE_MAX_QUBITS = 10


@dataclass(frozen=True)
class GroverInstance:
    n: int
    marked: tuple = (0,)
    representation: str = "subspace"

    def __post_init__(self):
        object.__setattr__(self, "marked", tuple(sorted({int(m) for m in self.marked})))
        if self.n < 1:
            raise ValueError("need at least one qubit")
        if not self.marked or min(self.marked) < 0 or max(self.marked) >= self.N:
            raise ValueError("marked items must lie in range(N)")
        if self.representation not in ("full", "subspace"):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.representation == "full" and self.n > FULL_SPACE_MAX_QUBITS:
            raise ValueError(f"full representation is limited to {FULL_SPACE_MAX_QUBITS} qubits")

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def dim(self) -> int:
        return self.N if self.representation == "full" else 2

    @property
    def marked_fraction(self) -> float:
        return len(self.marked) / self.N

    def plus_state(self) -> np.ndarray:
        if self.representation == "full":
            return np.full(self.N, 1 / math.sqrt(self.N), dtype=np.complex128)
        a = math.sqrt(self.marked_fraction)
        return np.array([a, math.sqrt(1 - a * a)], dtype=np.complex128)

    def marked_state(self) -> np.ndarray:
        """Uniform superposition of the marked items (|S> for a single one)."""
        if self.representation == "full":
            out = np.zeros(self.N, dtype=np.complex128)
            out[list(self.marked)] = 1 / math.sqrt(len(self.marked))
            return out
        return np.array([1.0, 0.0], dtype=np.complex128)

    def marked_projector(self) -> np.ndarray:
        if self.representation == "full":
            p = np.zeros((self.N, self.N), dtype=np.complex128)
            p[list(self.marked), list(self.marked)] = 1.0
            return p
        return np.diag([1.0, 0.0]).astype(np.complex128)

    def hamiltonian(self, s: float) -> np.ndarray:
        plus = self.plus_state()
        return -(s * self.marked_projector() + (1 - s) * np.outer(plus, plus.conj()))

    def derivative(self) -> np.ndarray:
        plus = self.plus_state()
        return -(self.marked_projector() - np.outer(plus, plus.conj()))


def grover_path(instance: GroverInstance) -> OperatorPath:
    deriv = instance.derivative()
    return OperatorPath(instance.hamiltonian, lambda s: deriv, "hamiltonian", 1.0,
                        f"grover-N{instance.N}")


def grover_tracker() -> EigenpathTracker:
    return EigenpathTracker(rule="smallest")


def grover_gap(s: float, N: int, marked: int = 1) -> float:
    if N < 2:
        raise ValueError("N must be at least 2")
    return math.sqrt(1 - 4 * s * (1 - s) * (1 - marked / N))


def relevant_gap(instance: GroverInstance, s: float, weight_tol: float = 1e-8) -> float:
    """Numeric gap between the ground state and the nearest level that
    overlaps the plane spanned by |+> and the marked superposition."""
    es = eigendecompose(instance.hamiltonian(s))
    basis = np.column_stack([instance.plus_state(), instance.marked_state()])
    basis, _ = np.linalg.qr(basis)
    weights = np.sum(np.abs(basis.conj().T @ es.eigenvectors) ** 2, axis=0)
    others = es.eigenvalues[1:][weights[1:] > weight_tol]
    return float(np.min(others - es.eigenvalues[0]))


def exact_path_length(N: int, marked: int = 1) -> float:
    """The ground state rotates monotonically from |+> to the marked state."""
    return math.acos(math.sqrt(marked / N))


def grover_schedule(N: int, delta: float) -> np.ndarray:
    """s_j = 1/2 - cot(2 j delta) / (2 sqrt N), clamped to [0, 1], ending at 1."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    j_max = int(math.floor(np.pi / (2 * delta) + 1e-9))
    out = []
    for j in range(1, j_max + 1):
        angle = 2 * j * delta
        if abs(angle - np.pi) < 1e-9:
            out.append(1.0)
            continue
        s = 0.5 - math.cos(angle) / math.sin(angle) / (2 * math.sqrt(N))
        out.append(min(max(s, 0.0), 1.0))
    if not out or out[-1] < 1.0:
        out.append(1.0)
    return np.array(out)


def run_grover_single_step(N: int, rng: np.random.Generator | None = None,
                           samples: int | None = None) -> float:
    """Success probability of one randomized evolution at s = 1/2 from |+>.

    The time is 0 or pi / Delta(1/2) with probability 1/2 each. Without
    ``samples`` the exact channel value is returned; otherwise a Monte Carlo
    estimate from ``samples`` draws of ``rng``.
    """
    if N < 4:
        raise ValueError("N must be at least 4")
    inst = GroverInstance(int(round(math.log2(N))), (0,), "subspace")
    if inst.N != N:
        raise ValueError("N must be a power of two")
    h = inst.hamiltonian(0.5)
    dist = TwoPoint(grover_gap(0.5, N))
    plus, target = inst.plus_state(), inst.marked_state()
    if samples is None:
        rho = randomized_evolution_exact(h, dist)(pure_density(plus))
        return fidelity(target, rho)
    if rng is None:
        raise ValueError("sampling needs a random generator")
    es = eigendecompose(h)
    coeffs = es.eigenvectors.conj().T @ plus
    t = np.asarray(dist.sample(rng, samples))
    amps = (np.exp(-1j * np.outer(t, es.eigenvalues)) * coeffs) @ es.eigenvectors.T
    return float(np.mean(np.abs(amps @ target.conj()) ** 2))


def run_grover(
    instance: GroverInstance,
    p: float,
    family: str = "compact_optimal",
    negative_ok: bool = True,
    mode: str = "exact",
    trajectories: int = 2000,
    seed: int = 0,
    length_bound: float | None = np.pi / 2,
) -> tuple[TraversalPlan, TraversalReport]:
    """Plan and execute the traversal from |+> to the marked state.

    The default length bound pi/2 exceeds the exact length arccos(sqrt(M/N)),
    so q depends on p only and the cost grows like 1/Delta.
    """
    path = grover_path(instance)
    tracker = grover_tracker()
    gap_floor = grover_gap(0.5, instance.N, len(instance.marked))
    plan = plan_randomization(path, tracker, p, gap_floor, family, negative_ok,
                              length_bound=length_bound, mode=mode,
                              trajectories=trajectories, seed=seed)
    report = execute(plan, path, tracker, instance.plus_state())
    report.extra["success_probability"] = fidelity(instance.marked_state(), report.final_density)
    report.extra["N"] = instance.N
    return plan, report
