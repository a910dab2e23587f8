"""Operator families H(s) / U(s), eigenstate continuation and arc length."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .qcore import EigenSystem, angular_distance, check_unitary, eigendecompose, unitary_eigensystem


class DegeneracyError(RuntimeError):
    """The tracked level is degenerate with another level."""


class TrackingLostError(RuntimeError):
    """No eigenvector continues the previous state with enough overlap."""


@dataclass(frozen=True)
class OperatorPath:
    """A continuous family of Hamiltonians or unitaries on s in [0, 1].

    For ``kind="unitary"`` the role of energies is played by eigenphases on
    (-pi, pi] and gaps are measured around the circle.
    """

    evaluate: Callable[[float], np.ndarray]
    derivative: Callable[[float], np.ndarray] | None = None
    kind: str = "hamiltonian"
    norm_bound: float = 1.0
    name: str = "path"

    def __post_init__(self):
        if self.kind not in ("hamiltonian", "unitary"):
            raise ValueError(f"unknown path kind {self.kind!r}")

    def __call__(self, s: float) -> np.ndarray:
        if not -1e-12 <= s <= 1 + 1e-12:
            raise ValueError(f"s={s} outside [0, 1]")
        op = np.asarray(self.evaluate(float(np.clip(s, 0.0, 1.0))), dtype=np.complex128)
        if self.kind == "unitary":
            check_unitary(op)
        return op

    def spectrum(self, s: float) -> EigenSystem:
        op = self(s)
        if self.kind == "unitary":
            return unitary_eigensystem(op)
        return eigendecompose(op)

    def level_distance(self, a, b):
        d = np.asarray(a) - np.asarray(b)
        if self.kind == "unitary":
            return np.abs(np.angle(np.exp(1j * d)))
        return np.abs(d)

    def derivative_at(self, s: float, h: float = 1e-5) -> np.ndarray:
        if self.derivative is not None:
            return np.asarray(self.derivative(s), dtype=np.complex128)
        lo, hi = max(0.0, s - h), min(1.0, s + h)
        return (self(hi) - self(lo)) / (hi - lo)

    def derivative_norm(self, s: float, h: float = 1e-5) -> float:
        return float(np.linalg.norm(self.derivative_at(s, h), ord=2))

    def hdot_bound(self, samples: int = 101) -> float:
        """sup_s ||dH/ds|| estimated on a uniform grid."""
        return max(self.derivative_norm(s) for s in np.linspace(0.0, 1.0, samples))


@dataclass
class EigenpathTracker:
    """How to pick and continue the tracked eigenstate.

    rule:
        ``"index"`` picks eigenvalue number ``index`` (ascending) at the first
        query, ``"smallest"``/``"largest"`` the extreme levels, and
        ``"reference"`` the eigenspace with largest weight on ``reference``
        (a vector or a callable of s). Once a previous state is supplied,
        the first three continue by maximal overlap.
    threshold:
        Minimum squared overlap accepted between neighbouring samples.
    """

    rule: str = "index"
    index: int = 0
    reference: np.ndarray | Callable[[float], np.ndarray] | None = None
    threshold: float = 0.5
    max_refinements: int = 20
    degeneracy_tol: float = 1e-12
    cluster_tol: float = 1e-9
    lost_count: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.rule not in ("index", "smallest", "largest", "reference"):
            raise ValueError(f"unknown selection rule {self.rule!r}")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if self.rule == "reference" and self.reference is None:
            raise ValueError("reference rule needs a reference state")

    def copy(self) -> EigenpathTracker:
        return copy.deepcopy(self)

    def reference_at(self, s: float) -> np.ndarray:
        ref = self.reference(s) if callable(self.reference) else self.reference
        return np.asarray(ref, dtype=np.complex128).ravel()


class TrackedState(NamedTuple):
    state: np.ndarray
    energy: float
    gap: float


def _fix_phase(psi: np.ndarray, prev: np.ndarray | None) -> np.ndarray:
    if prev is not None:
        c = np.vdot(prev, psi)
    else:
        c = psi[np.argmax(np.abs(psi))]
    return psi * (abs(c) / c) if abs(c) > 0 else psi


def eigenstate_at(
    path: OperatorPath,
    tracker: EigenpathTracker,
    s: float,
    prev: np.ndarray | None = None,
) -> TrackedState:
    """Tracked eigenstate of the path at ``s`` with its energy and gap.

    With ``prev`` the phase is fixed so that <prev|psi(s)> is real positive.
    """
    es = path.spectrum(s)
    w, v = es.eigenvalues, es.eigenvectors

    if tracker.rule == "reference":
        ref = tracker.reference_at(s)
        best, best_weight, best_members = None, -1.0, None
        assigned = np.zeros(len(w), dtype=bool)
        for k in range(len(w)):
            if assigned[k]:
                continue
            members = (path.level_distance(w, w[k]) <= tracker.cluster_tol) & ~assigned
            assigned |= members
            proj = v[:, members] @ (v[:, members].conj().T @ ref)
            weight = float(np.vdot(proj, proj).real)
            if weight > best_weight:
                best, best_weight, best_members = proj, weight, members
        if best_weight < tracker.threshold * np.vdot(ref, ref).real:
            tracker.lost_count += 1
            raise TrackingLostError(f"reference weight {best_weight:.3g} below threshold at s={s}")
        psi = best / np.linalg.norm(best)
        energy = float(np.mean(w[best_members]))
        others = w[~best_members]
        gap = float(np.min(path.level_distance(others, energy))) if others.size else np.inf
    else:
        if prev is None:
            k = {"index": tracker.index, "smallest": 0, "largest": len(w) - 1}[tracker.rule]
        else:
            weights = np.abs(v.conj().T @ prev) ** 2
            k = int(np.argmax(weights))
            if weights[k] < tracker.threshold:
                tracker.lost_count += 1
                raise TrackingLostError(f"max squared overlap {weights[k]:.3g} below threshold at s={s}")
        psi = v[:, k]
        energy = float(w[k])
        others = np.delete(w, k)
        gap = float(np.min(path.level_distance(others, energy))) if others.size else np.inf

    if gap <= tracker.degeneracy_tol:
        raise DegeneracyError(f"tracked level is degenerate at s={s} (gap {gap:.3g})")
    return TrackedState(_fix_phase(psi, prev), energy, gap)


def track(
    path: OperatorPath,
    tracker: EigenpathTracker,
    s_values,
    start: TrackedState | None = None,
    s_start: float | None = None,
) -> list[TrackedState]:
    """Continue the tracked eigenstate through ``s_values`` in order.

    Steps whose overlap falls below the tracker threshold are bisected, up to
    ``tracker.max_refinements`` times, before giving up.
    """
    s_values = [float(s) for s in s_values]
    out = []
    if start is None:
        s_prev = s_values[0] if s_start is None else s_start
        current = eigenstate_at(path, tracker, s_prev)
    else:
        s_prev, current = s_start, start

    def advance(a: float, state: TrackedState, b: float, depth: int) -> TrackedState:
        try:
            return eigenstate_at(path, tracker, b, prev=state.state)
        except TrackingLostError:
            if depth >= tracker.max_refinements:
                raise
            mid = advance(a, state, (a + b) / 2, depth + 1)
            return advance((a + b) / 2, mid, b, depth + 1)

    for s in s_values:
        if s_prev is not None and s == s_prev:
            out.append(current)
            continue
        current = advance(s_prev, current, s, 0)
        s_prev = s
        out.append(current)
    return out


@dataclass(frozen=True)
class ArcLengthTable:
    """Sample points with cumulative path length from ``s[0]``."""

    s: np.ndarray
    lengths: np.ndarray
    states: np.ndarray
    tol: float
    refinement_increment: float

    @property
    def total(self) -> float:
        return float(self.lengths[-1])

    @property
    def converged(self) -> bool:
        return self.refinement_increment <= self.tol


def build_arc_length_table(
    path: OperatorPath,
    tracker: EigenpathTracker,
    tol: float = 1e-6,
    s_range: tuple[float, float] = (0.0, 1.0),
    initial_segments: int = 16,
    max_depth: int = 40,
) -> ArcLengthTable:
    """Adaptive bisection estimate of the path length.

    A segment [a, b] is accepted once splitting it at the midpoint raises the
    summed angular distance by at most ``tol * (b - a) / (s1 - s0)``.
    By the triangle inequality each split can only increase the estimate.
    """
    s0, s1 = s_range
    grid = np.linspace(s0, s1, initial_segments + 1)
    states = track(path, tracker, grid)
    pts_s, pts_psi, seg_len = [grid[0]], [states[0].state], []
    increment = 0.0
    width = s1 - s0

    def refine(a, ta, b, tb, depth):
        nonlocal increment
        m = (a + b) / 2
        tm = track(path, tracker, [m], start=ta, s_start=a)[0]
        whole = angular_distance(ta.state, tb.state)
        left = angular_distance(ta.state, tm.state)
        right = angular_distance(tm.state, tb.state)
        excess = left + right - whole
        if excess <= tol * (b - a) / width or depth >= max_depth:
            increment += max(excess, 0.0)
            pts_s.extend([m, b])
            pts_psi.extend([tm.state, tb.state])
            seg_len.extend([left, right])
            return
        refine(a, ta, m, tm, depth + 1)
        refine(m, tm, b, tb, depth + 1)

    for k in range(initial_segments):
        refine(grid[k], states[k], grid[k + 1], states[k + 1], 0)

    lengths = np.concatenate([[0.0], np.cumsum(seg_len)])
    return ArcLengthTable(np.array(pts_s), lengths, np.array(pts_psi), tol, increment)


def path_length(path: OperatorPath, tracker: EigenpathTracker, tol: float = 1e-6) -> float:
    return build_arc_length_table(path, tracker, tol).total


def path_length_refinements(path: OperatorPath, tracker: EigenpathTracker, levels: int = 8) -> list[float]:
    """Summed angular distances over dyadic grids with 2**k segments, k = 0..levels."""
    fine = np.linspace(0.0, 1.0, 2**levels + 1)
    states = [t.state for t in track(path, tracker, fine)]
    out = []
    for k in range(levels + 1):
        stride = 2 ** (levels - k)
        sub = states[::stride]
        out.append(sum(angular_distance(sub[i], sub[i + 1]) for i in range(len(sub) - 1)))
    return out


def uniform_parametrization(
    path: OperatorPath,
    tracker: EigenpathTracker,
    q: int,
    tol: float = 1e-6,
    table: ArcLengthTable | None = None,
) -> np.ndarray:
    """Points s_1 < ... < s_q = 1 with L(s_j) = j L / q."""
    if q < 1:
        raise ValueError("q must be a positive integer")
    if table is None:
        table = build_arc_length_table(path, tracker, tol)
    if not table.converged:
        raise ValueError("arc-length table has not converged")
    total = table.total
    out = np.empty(q)
    out[-1] = table.s[-1]
    for j in range(1, q):
        target = j * total / q
        k = int(np.searchsorted(table.lengths, target, side="right")) - 1
        k = min(k, len(table.s) - 2)
        a, b = table.s[k], table.s[k + 1]
        base = table.states[k]
        need = target - table.lengths[k]
        if need <= 1e-12:
            out[j - 1] = a
            continue
        start = TrackedState(base, 0.0, np.inf)

        def excess(s):
            st = track(path, tracker, [s], start=start, s_start=a)[0]
            return angular_distance(base, st.state) - need

        fb = excess(b)
        out[j - 1] = b if fb <= 0 else brentq(excess, a, b, xtol=1e-14, rtol=1e-15)
    return out


class SubuniformSchedule(NamedTuple):
    schedule: np.ndarray
    length_bound: float


def subuniform_schedule(
    path: OperatorPath | None,
    gap: float,
    hdot_bound: float | None,
    q: int,
) -> SubuniformSchedule:
    """Schedule from s(l) = gap * l / hdot_bound sampled at l_j = j L'/q.

    ``L' = hdot_bound / gap`` bounds the path length, so s_j = j / q.
    """
    if gap <= 0:
        raise ValueError("gap lower bound must be positive")
    if q < 1:
        raise ValueError("q must be a positive integer")
    if hdot_bound is None:
        if path is None:
            raise ValueError("need a path or an explicit derivative bound")
        hdot_bound = path.hdot_bound()
    length_bound = hdot_bound / gap
    l = np.arange(1, q + 1) * length_bound / q
    return SubuniformSchedule(np.minimum(gap * l / hdot_bound, 1.0), float(length_bound))


class DerivativeCheck(NamedTuple):
    lhs: float
    rhs: float
    passed: bool


def derivative_bound_check(
    path: OperatorPath,
    tracker: EigenpathTracker,
    s: float,
    h: float = 1e-5,
) -> DerivativeCheck:
    """Compare ||d psi/ds|| (central difference) against ||dH/ds|| / gap."""
    if path.kind != "hamiltonian":
        raise ValueError("derivative bound applies to Hamiltonian paths")
    lo, hi = max(0.0, s - h), min(1.0, s + h)
    center = eigenstate_at(path, tracker, s)
    before, after = track(path, tracker, [lo, hi], start=center, s_start=s)
    # re-align the far end to the centre so both sides share its phase
    after = TrackedState(_fix_phase(after.state, center.state), after.energy, after.gap)
    before = TrackedState(_fix_phase(before.state, center.state), before.energy, before.gap)
    d = (after.state - before.state) / (hi - lo)
    d = d - np.vdot(center.state, d) * center.state
    lhs = float(np.linalg.norm(d))
    rhs = path.derivative_norm(s, h) / center.gap
    return DerivativeCheck(lhs, rhs, lhs <= rhs + 1e-6 * max(1.0, rhs))


def linear_path(a, b, name: str = "linear") -> OperatorPath:
    """H(s) = (1 - s) A + s B."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    diff = b - a
    return OperatorPath(lambda s: (1 - s) * a + s * b, lambda s: diff, name=name)
