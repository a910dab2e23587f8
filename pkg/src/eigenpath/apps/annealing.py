"""Quantum simulated annealing along the Gibbs-state path.

The coherent Gibbs state |psi(beta)> = sum_x sqrt(pi_x(beta)) |x> is the
+1 eigenvector of the discriminant D(beta) of a reversible Metropolis chain,
equivalently the ground state of I - D(beta) with gap Gamma(beta). On the
doubled space the Szegedy walk W = S (2 V V^+ - I) has the eigenphase-0
eigenvector V sqrt(pi), and its remaining eigenphases satisfy cos(theta) =
lambda for the discriminant eigenvalues lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..paths import EigenpathTracker, OperatorPath, path_length
from ..qcore import check_unitary
from ..traversal import TraversalPlan, TraversalReport, execute, plan_randomization

DETAILED_BALANCE_TOL = 1e-10


def metropolis_matrix(energies, beta: float, proposal: str = "complete",
                      laziness: float = 0.5) -> np.ndarray:
    """Lazy Metropolis chain (1 - a) I + a P_M for the Gibbs weights at ``beta``."""
    e = np.asarray(energies, dtype=float)
    d = len(e)
    if proposal == "complete":
        k = (np.ones((d, d)) - np.eye(d)) / max(d - 1, 1)
    elif proposal == "ring":
        k = np.zeros((d, d))
        idx = np.arange(d)
        k[idx, (idx + 1) % d] += 0.5
        k[idx, (idx - 1) % d] += 0.5
        np.fill_diagonal(k, 0.0)
    else:
        raise ValueError(f"unknown proposal {proposal!r}")
    accept = np.minimum(1.0, np.exp(-beta * (e[None, :] - e[:, None])))
    p = laziness * k * accept
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))
    return p


def gibbs_weights(energies, beta: float) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (e - e.min()))
    return w / w.sum()


def energy_std(energies, beta: float) -> float:
    e = np.asarray(energies, dtype=float)
    pi = gibbs_weights(e, beta)
    mean = pi @ e
    return float(math.sqrt(max(pi @ (e - mean) ** 2, 0.0)))


def check_detailed_balance(p, pi, atol: float = DETAILED_BALANCE_TOL) -> None:
    flow = pi[:, None] * p
    err = float(np.max(np.abs(flow - flow.T)))
    if err > atol:
        raise ValueError(f"detailed balance violated (max flow asymmetry {err:.3g})")


def discriminant(p, pi=None) -> np.ndarray:
    """D_xy = sqrt(p_xy p_yx)."""
    p = np.asarray(p, dtype=float)
    if pi is not None:
        check_detailed_balance(p, pi)
    return np.sqrt(p * p.T)


def chain_gap(p, pi) -> float:
    """1 - second largest discriminant eigenvalue."""
    lam = np.linalg.eigvalsh(discriminant(p, pi))
    return float(1.0 - lam[-2]) if len(lam) > 1 else 1.0


@dataclass(frozen=True)
class GibbsState:
    beta: float
    amplitudes: np.ndarray

    @property
    def distribution(self) -> np.ndarray:
        return self.amplitudes**2


@dataclass(frozen=True)
class AnnealingInstance:
    """Energies E[x] on d' configurations with a Metropolis chain per beta."""

    energies: np.ndarray
    beta_final: float | None = None
    proposal: str = "complete"
    laziness: float = 0.5

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).ravel()
        object.__setattr__(self, "energies", e)
        if e.size < 2:
            raise ValueError("need at least two configurations")
        if not 0 < self.laziness <= 1:
            raise ValueError("laziness must lie in (0, 1]")
        if self.beta_final is None:
            gamma = self.energy_gap
            beta = math.ceil(math.log(self.d / 0.1) / gamma) if gamma > 0 else 1.0
            object.__setattr__(self, "beta_final", float(beta))
        if self.beta_final <= 0:
            raise ValueError("beta_final must be positive")

    @property
    def d(self) -> int:
        return len(self.energies)

    @property
    def energy_gap(self) -> float:
        """gamma: distance from the minimum energy to the next distinct level."""
        levels = np.unique(np.round(self.energies, 12))
        return float(levels[1] - levels[0]) if levels.size > 1 else 0.0

    @property
    def energy_spread(self) -> float:
        return float(np.ptp(self.energies))

    def transition_matrix(self, beta: float) -> np.ndarray:
        return metropolis_matrix(self.energies, beta, self.proposal, self.laziness)

    def stationary(self, beta: float) -> np.ndarray:
        return gibbs_weights(self.energies, beta)

    def sigma(self, beta: float) -> float:
        return energy_std(self.energies, beta)

    def sigma_max(self, samples: int = 2001) -> float:
        return max(self.sigma(b) for b in np.linspace(0.0, self.beta_final, samples))

    def chain_gap(self, beta: float) -> float:
        return chain_gap(self.transition_matrix(beta), self.stationary(beta))

    def min_chain_gap(self, samples: int = 201) -> float:
        return min(self.chain_gap(b) for b in np.linspace(0.0, self.beta_final, samples))

    def ground_configurations(self) -> np.ndarray:
        return np.flatnonzero(np.isclose(self.energies, self.energies.min()))


def random_instance(d: int, rng: np.random.Generator, levels: int = 4, **kwargs) -> AnnealingInstance:
    """Integer energies in [0, levels) with a unique minimum at a random site."""
    e = rng.integers(1, levels, size=d).astype(float)
    e[rng.integers(d)] = 0.0
    return AnnealingInstance(e, **kwargs)


def gibbs_state(instance: AnnealingInstance, beta: float) -> GibbsState:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return GibbsState(float(beta), np.sqrt(instance.stationary(beta)))


@dataclass(frozen=True)
class GibbsDerivativeCheck:
    lhs: float
    rhs: float
    passed: bool


def gibbs_derivative_check(instance: AnnealingInstance, beta: float, h: float = 1e-5) -> GibbsDerivativeCheck:
    """Central-difference norm of d psi / d beta against sigma(beta) / 2."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    lo = gibbs_state(instance, max(beta - h, 0.0)).amplitudes
    hi = gibbs_state(instance, beta + h).amplitudes
    lhs = float(np.linalg.norm(hi - lo) / (beta + h - max(beta - h, 0.0)))
    rhs = instance.sigma(beta) / 2
    return GibbsDerivativeCheck(lhs, rhs, abs(lhs - rhs) <= 1e-6)


def gibbs_path(instance: AnnealingInstance) -> OperatorPath:
    """H(s) = I - D(s beta_f); the Gibbs state is its ground state with gap Gamma."""
    eye = np.eye(instance.d)

    def evaluate(s):
        beta = s * instance.beta_final
        return (eye - discriminant(instance.transition_matrix(beta))).astype(np.complex128)

    return OperatorPath(evaluate, kind="hamiltonian", norm_bound=2.0, name="gibbs")


def qsa_path_length_bound(instance: AnnealingInstance, tol: float = 1e-7) -> tuple[float, float]:
    """Numeric length of the Gibbs path and the bound beta_f * sup sigma / 2."""
    length = path_length(gibbs_path(instance), EigenpathTracker(rule="smallest"), tol)
    bound = instance.beta_final * instance.sigma_max() / 2
    if length > bound + 10 * tol:
        raise AssertionError(f"path length {length:.9g} exceeds bound {bound:.9g}")
    return length, bound


def two_state_length(beta_final: float) -> float:
    """Length of the Gibbs path for energies {0, 1}: integral of sech(beta/2)/4."""
    return 0.5 * math.atan(math.sinh(beta_final / 2))


def walk_isometry(p) -> np.ndarray:
    """V |x> = |x> sum_y sqrt(p_xy) |y>, as a d^2 x d matrix."""
    p = np.asarray(p, dtype=float)
    d = len(p)
    v = np.zeros((d * d, d))
    for x in range(d):
        v[x * d:(x + 1) * d, x] = np.sqrt(p[x])
    return v


def swap_operator(d: int) -> np.ndarray:
    idx = np.arange(d * d)
    x, y = divmod(idx, d)
    s = np.zeros((d * d, d * d))
    s[y * d + x, idx] = 1.0
    return s


def szegedy_walk(p, pi) -> np.ndarray:
    """W = S (2 V V^+ - I) on the doubled space."""
    p = np.asarray(p, dtype=float)
    check_detailed_balance(p, np.asarray(pi, dtype=float))
    v = walk_isometry(p)
    refl = 2 * v @ v.T - np.eye(len(v))
    w = (swap_operator(len(p)) @ refl).astype(np.complex128)
    return check_unitary(w)


def walk_stationary_state(p, pi) -> np.ndarray:
    """V sqrt(pi): eigenphase-0 eigenvector of the walk."""
    return (walk_isometry(p) @ np.sqrt(np.asarray(pi, dtype=float))).astype(np.complex128)


@dataclass(frozen=True)
class WalkSpectrumCheck:
    discriminant_eigenvalues: np.ndarray
    matched_phases: np.ndarray
    max_mismatch: float
    phase_gap: float


def walk_spectrum_check(p, pi) -> WalkSpectrumCheck:
    """Match each discriminant eigenvalue lambda with a walk eigenphase arccos(lambda).

    The walk maps span{V u, S V u} into itself for each discriminant
    eigenvector u; the phases are read off from that two-dimensional block.
    """
    p = np.asarray(p, dtype=float)
    w = szegedy_walk(p, pi)
    lam, u = np.linalg.eigh(discriminant(p, pi))
    v = walk_isometry(p)
    s = swap_operator(len(p))
    phases = np.empty(len(lam))
    for k in range(len(lam)):
        a = v @ u[:, k]
        b = s @ a
        b_perp = b - (a @ b) * a
        if np.linalg.norm(b_perp) < 1e-12:
            # lambda = +-1: a is an eigenvector of W
            phases[k] = np.angle(a @ (w @ a))
            continue
        basis = np.column_stack([a, b_perp / np.linalg.norm(b_perp)])
        block = basis.conj().T @ w @ basis
        phases[k] = np.max(np.abs(np.angle(np.linalg.eigvals(block))))
    mismatch = float(np.max(np.abs(np.cos(phases) - lam)))
    order = np.argsort(lam)
    gap = float(np.arccos(np.clip(lam[order][-2], -1, 1))) if len(lam) > 1 else np.pi
    return WalkSpectrumCheck(lam, phases, mismatch, gap)


def walk_phase_gap(p, pi) -> float:
    """Smallest nonzero walk eigenphase on the orbit of V: arccos(lambda_2)."""
    return walk_spectrum_check(p, pi).phase_gap


def walk_path(instance: AnnealingInstance) -> tuple[OperatorPath, EigenpathTracker]:
    """Walk unitaries W(s beta_f) with the tracked eigenvector V sqrt(pi).

    The +1 eigenspace of W also contains vectors outside the orbit of V, so
    the tracker projects the known stationary vector onto the whole cluster.
    """
    def evaluate(s):
        beta = s * instance.beta_final
        return szegedy_walk(instance.transition_matrix(beta), instance.stationary(beta))

    def reference(s):
        beta = s * instance.beta_final
        return walk_stationary_state(instance.transition_matrix(beta), instance.stationary(beta))

    path = OperatorPath(evaluate, kind="unitary", norm_bound=1.0, name="szegedy")
    return path, EigenpathTracker(rule="reference", reference=reference, cluster_tol=1e-9)


def walk_length_bound(instance: AnnealingInstance) -> float:
    """beta_f * sqrt(sigma_max^2 + (E_max - E_min)^2) / 2.

    Bounds the length of V(beta) sqrt(pi(beta)) when every holding
    probability is at least 1/2, since then |d log p_xy / d beta| is at most
    the energy spread.
    """
    if instance.laziness > 0.5:
        raise ValueError("the length bound needs holding probabilities of at least 1/2")
    return instance.beta_final * math.hypot(instance.sigma_max(), instance.energy_spread) / 2


def walk_gap_floor(instance: AnnealingInstance, samples: int = 401, margin: float = 1e-3) -> float:
    gaps = [walk_phase_gap(instance.transition_matrix(b), instance.stationary(b))
            for b in np.linspace(0.0, instance.beta_final, samples)]
    return float(min(gaps) * (1 - margin))


def run_qsa(
    instance: AnnealingInstance,
    p: float,
    negative_ok: bool = True,
    mode: str = "exact",
    trajectories: int = 2000,
    seed: int = 0,
    gap_floor: float | None = None,
) -> tuple[TraversalPlan, TraversalReport]:
    """Traverse the walk eigenpath from beta = 0 to beta_f.

    Times are walk-step counts: the integer restriction of the compact
    distribution when inverse steps are allowed, repeated uniform counts
    otherwise. The report cost is the expected number of walk applications.
    """
    path, tracker = walk_path(instance)
    if gap_floor is None:
        gap_floor = walk_gap_floor(instance)
    family = "compact_optimal" if negative_ok else "uniform_int"
    plan = plan_randomization(path, tracker, p, gap_floor, family, negative_ok,
                              length_bound=walk_length_bound(instance), schedule="subuniform",
                              mode=mode, trajectories=trajectories, seed=seed)
    report = execute(plan, path, tracker)
    d = instance.d
    rho = report.final_density.reshape(d, d, d, d)
    marginal = np.real(np.einsum("xyzy->xz", rho)).diagonal().copy()
    ground = instance.ground_configurations()
    target = instance.stationary(instance.beta_final)
    report.extra.update({
        "configuration_distribution": marginal.tolist(),
        "ground_probability": float(marginal[ground].sum()),
        "gibbs_ground_probability": float(target[ground].sum()),
        "walk_applications": report.total_cost,
        "gap_floor": gap_floor,
        "beta_final": instance.beta_final,
    })
    return plan, report


def lazy_family(energies, laziness_values, **kwargs) -> list[AnnealingInstance]:
    """Instances sharing energies and beta_f with chain gaps tuned by laziness."""
    return [AnnealingInstance(np.asarray(energies, dtype=float), laziness=a, **kwargs)
            for a in laziness_values]

