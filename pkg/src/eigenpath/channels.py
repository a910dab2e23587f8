"""Quantum channels: projective-measurement operations, randomized evolution
and the phase-estimation channel.

All channels act on dense density matrices. ``randomized_evolution_exact``
multiplies the coherence between eigenvectors j and k of the generator by the
characteristic function of the evolution time at the corresponding energy
difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .paths import DegeneracyError
from .qcore import (
    POLICY,
    check_hermitian,
    check_state,
    check_unitary,
    eigendecompose,
    pure_density,
    trace_norm,
    unitary_eigensystem,
)
from .timedist import TimeDistribution, dephasing_error


@dataclass(frozen=True)
class QuantumChannel:
    """A map on density matrices of a fixed dimension."""

    kind: str
    apply_fn: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.complex128)
        if rho.shape != (self.dim, self.dim):
            raise ValueError(f"{self.kind}: expected a {self.dim}x{self.dim} operator, got {rho.shape}")
        return self.apply_fn(rho)

    def then(self, other: QuantumChannel) -> QuantumChannel:
        """Apply ``self`` first, then ``other``."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return QuantumChannel(f"{self.kind}>{other.kind}", lambda r: other(self(r)), self.dim)


def identity_channel(dim: int) -> QuantumChannel:
    return QuantumChannel("identity", lambda r: r.copy(), dim)


def unitary_channel(u) -> QuantumChannel:
    u = check_unitary(u)
    return QuantumChannel("unitary", lambda r: u @ r @ u.conj().T, len(u))


def check_rank1_projector(p, atol: float = POLICY.invariant) -> np.ndarray:
    p = check_hermitian(p, atol=atol)
    if np.max(np.abs(p @ p - p)) > atol:
        raise ValueError("operator is not a projector")
    if abs(np.trace(p).real - 1.0) > atol:
        raise ValueError("projector does not have rank one")
    return p


def projective_measurement_op(p, complement: QuantumChannel | None = None) -> QuantumChannel:
    """rho -> P rho P + E((1 - P) rho (1 - P)).

    ``complement`` (E) defaults to the identity. It must map the range of
    1 - P into itself; this is the caller's responsibility.
    """
    p = check_rank1_projector(p)
    dim = len(p)
    q = np.eye(dim) - p
    e = complement if complement is not None else identity_channel(dim)

    def apply(rho):
        return p @ rho @ p + e(q @ rho @ q)

    return QuantumChannel("projective-measurement", apply, dim)


def _spectrum(op, kind: str):
    """Eigenvectors and "frequencies" for the generator of the evolution.

    For a Hamiltonian the frequencies are -E (so that exp(-iHt) = V e^{i f t} V^+);
    for a unitary they are the eigenphases.
    """
    if kind == "hamiltonian":
        es = eigendecompose(op)
        return es.eigenvectors, -es.eigenvalues, es.eigenvalues
    if kind == "unitary":
        es = unitary_eigensystem(op)
        return es.eigenvectors, es.eigenvalues, es.eigenvalues
    raise ValueError(f"unknown generator kind {kind!r}")


def _require_integer_times(dist: TimeDistribution, kind: str):
    if kind == "unitary" and not dist.integer:
        raise ValueError(f"{dist.kind} has non-integer support; unitary powers need integer times")


def dephasing_mask(freqs: np.ndarray, dist: TimeDistribution) -> np.ndarray:
    """M[j, k] = Phi(f_j - f_k)."""
    diff = freqs[:, None] - freqs[None, :]
    return dist.char_fn(diff)


def randomized_evolution_exact(op, dist: TimeDistribution, kind: str = "hamiltonian") -> QuantumChannel:
    """Average of exp(-i H T) rho exp(i H T) (or U^T rho U^-T) over T ~ dist."""
    _require_integer_times(dist, kind)
    v, freqs, _ = _spectrum(op, kind)
    mask = dephasing_mask(freqs, dist)

    def apply(rho):
        return v @ (mask * (v.conj().T @ rho @ v)) @ v.conj().T

    return QuantumChannel("randomized-evolution", apply, len(v))


def evolve_for(op, t: float, psi, kind: str = "hamiltonian") -> np.ndarray:
    v, freqs, _ = _spectrum(op, kind)
    return v @ (np.exp(1j * freqs * t) * (v.conj().T @ psi))


def randomized_evolution_sampled(op, dist: TimeDistribution, psi, rng: np.random.Generator,
                                 kind: str = "hamiltonian") -> tuple[np.ndarray, float]:
    """One trajectory: draw t from ``dist`` and evolve ``psi`` for time t."""
    _require_integer_times(dist, kind)
    psi = check_state(psi)
    t = dist.sample(rng)
    return evolve_for(op, t, psi, kind), float(t)


def witness_measurement_op(op, dist: TimeDistribution, target_index: int,
                           kind: str = "hamiltonian") -> QuantumChannel:
    """Projective-measurement operation onto eigenvector ``target_index`` whose
    complement map is the randomized evolution itself."""
    v, _, _ = _spectrum(op, kind)
    target = v[:, target_index]
    rand = randomized_evolution_exact(op, dist, kind)
    return projective_measurement_op(pure_density(target), rand)


@dataclass(frozen=True)
class DephasingCheck:
    distance: float
    bound: float
    passed: bool


def target_gaps(op, target_index: int, kind: str = "hamiltonian",
                degeneracy_tol: float = 1e-12) -> np.ndarray:
    """omega_j = E_j - E_target for j != target (wrapped phases for unitaries)."""
    _, _, levels = _spectrum(op, kind)
    gaps = np.delete(levels - levels[target_index], target_index)
    if kind == "unitary":
        gaps = np.angle(np.exp(1j * gaps))
    if gaps.size and np.min(np.abs(gaps)) <= degeneracy_tol:
        raise DegeneracyError(f"eigenvalue {target_index} is degenerate")
    return gaps


def dephasing_bound_check(op, dist: TimeDistribution, rho, target_index: int,
                          kind: str = "hamiltonian") -> DephasingCheck:
    """Trace distance between the randomized channel and its measurement witness."""
    gaps = target_gaps(op, target_index, kind)
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim == 1:
        rho = pure_density(rho)
    rand = randomized_evolution_exact(op, dist, kind)
    meas = witness_measurement_op(op, dist, target_index, kind)
    distance = trace_norm(meas(rho) - rand(rho))
    bound = dephasing_error(dist, gaps) if gaps.size else 0.0
    return DephasingCheck(distance, bound, bool(distance <= bound + 1e-9))


def _unitary_powers(u, count: int) -> list[np.ndarray]:
    powers = [np.eye(len(u), dtype=np.complex128)]
    for _ in range(count - 1):
        powers.append(u @ powers[-1])
    return powers


def _hadamard_all(r: int) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    out = np.ones((1, 1), dtype=np.complex128)
    for _ in range(r):
        out = np.kron(out, h)
    return out


def _qft(r: int) -> np.ndarray:
    n = 2**r
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def _controlled_power(u_pow: np.ndarray, bit: int, r: int) -> np.ndarray:
    """Apply ``u_pow`` to the system when ancilla qubit ``bit`` (value 2^bit) is set."""
    n, d = 2**r, len(u_pow)
    out = np.zeros((n * d, n * d), dtype=np.complex128)
    for a in range(n):
        block = u_pow if (a >> bit) & 1 else np.eye(d)
        out[a * d:(a + 1) * d, a * d:(a + 1) * d] = block
    return out


def _partial_trace_ancilla(rho: np.ndarray, n: int, d: int) -> np.ndarray:
    return np.einsum("aiaj->ij", rho.reshape(n, d, n, d))


def pea_channel(u, r: int, mode: str = "algebraic") -> QuantumChannel:
    """System channel of r-ancilla phase estimation with the outcome discarded.

    ``algebraic``: rho -> 2^-r sum_j U^j rho U^-j.
    ``circuit``: Hadamards on the ancillas, controlled U^(2^k) gates, inverse
    Fourier transform, then the ancilla register is traced out.
    """
    u = check_unitary(u)
    if r < 1:
        raise ValueError("r must be a positive integer")
    d, n = len(u), 2**r

    if mode == "algebraic":
        powers = _unitary_powers(u, n)

        def apply(rho):
            return sum(p @ rho @ p.conj().T for p in powers) / n

        return QuantumChannel("pea", apply, d)

    if mode != "circuit":
        raise ValueError(f"unknown mode {mode!r}")

    circuit = np.kron(_hadamard_all(r), np.eye(d))
    u_pow = u
    for bit in range(r):
        circuit = _controlled_power(u_pow, bit, r) @ circuit
        u_pow = u_pow @ u_pow
    circuit = np.kron(_qft(r).conj().T, np.eye(d)) @ circuit
    anc0 = np.zeros((n, n), dtype=np.complex128)
    anc0[0, 0] = 1.0

    def apply_circuit(rho):
        full = circuit @ np.kron(anc0, rho) @ circuit.conj().T
        return _partial_trace_ancilla(full, n, d)

    return QuantumChannel("pea-circuit", apply_circuit, d)
