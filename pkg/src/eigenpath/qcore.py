"""Dense complex linear algebra and quantum-state primitives.

States are plain ``numpy`` arrays: a pure state is a complex vector of unit
norm, a mixed state a Hermitian, unit-trace, positive semidefinite matrix.
The ``check_*`` helpers validate those invariants and return a
``complex128`` copy so callers never mutate shared data.

All state comparisons in this package are projective (``fidelity`` and
``angular_distance``); raw amplitude vectors are never compared directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances shared by the whole package."""

    invariant: float = 1e-10
    construction: float = 1e-12
    psd: float = 1e-9


POLICY = NumericPolicy()


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues in ascending order with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def vector(self, k: int) -> np.ndarray:
        return self.eigenvectors[:, k].copy()


def check_state(psi, atol: float = POLICY.invariant) -> np.ndarray:
    psi = np.array(psi, dtype=np.complex128).ravel()
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state norm {norm!r} differs from 1")
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.array(psi, dtype=np.complex128).ravel()
    return psi / np.linalg.norm(psi)


def check_hermitian(h, atol: float = POLICY.construction) -> np.ndarray:
    h = np.array(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    err = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if err > atol * scale:
        raise NotHermitianError(f"matrix is not Hermitian (max deviation {err:.3g})")
    return (h + h.conj().T) / 2


def check_density(rho, atol: float = POLICY.invariant) -> np.ndarray:
    rho = check_hermitian(rho, atol=atol)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValueError(f"density matrix trace {tr!r} differs from 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -POLICY.psd:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")
    return rho


def check_unitary(u, atol: float = POLICY.invariant) -> np.ndarray:
    u = np.array(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(len(u))))
    if err > atol:
        raise ValueError(f"matrix is not unitary (max deviation {err:.3g})")
    return u


def pure_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    return np.outer(psi, psi.conj())


def eigendecompose(h, atol: float = POLICY.invariant) -> EigenSystem:
    """Spectral decomposition of a Hermitian matrix, eigenvalues ascending.

    Raises NotHermitianError if ``h`` deviates from Hermitian by more than
    ``atol`` (relative to its largest entry).
    """
    h = check_hermitian(h, atol=atol)
    w, v = np.linalg.eigh(h)
    return EigenSystem(w, v)


def unitary_eigensystem(u, atol: float = POLICY.invariant) -> EigenSystem:
    """Eigenphases on (-pi, pi] (ascending) and eigenvectors of a unitary.

    Uses the complex Schur form, which is diagonal for normal matrices, so
    degenerate eigenspaces still receive an orthonormal basis.
    """
    from scipy.linalg import schur

    u = check_unitary(u, atol=atol)
    t, z = schur(u, output="complex")
    phases = np.angle(np.diag(t))
    phases = np.where(phases <= -np.pi, phases + 2 * np.pi, phases)
    order = np.argsort(phases, kind="stable")
    return EigenSystem(phases[order], z[:, order])


def expm_hermitian(h, t: float) -> np.ndarray:
    es = eigendecompose(h)
    v = es.eigenvectors
    return (v * np.exp(-1j * es.eigenvalues * t)) @ v.conj().T


def evolve(h, t: float, psi) -> np.ndarray:
    """Return exp(-i h t) psi, computed in the eigenbasis of ``h``."""
    psi = check_state(psi)
    es = eigendecompose(h)
    v = es.eigenvectors
    return v @ (np.exp(-1j * es.eigenvalues * t) * (v.conj().T @ psi))


def trace_norm(a) -> float:
    """Sum of singular values (orthogonal pure states are at distance 2)."""
    a = np.asarray(a, dtype=np.complex128)
    if a.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def fidelity(psi, rho) -> float:
    """<psi|rho|psi>, clipped to [0, 1]."""
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (len(psi), len(psi)):
        raise ValueError(f"dimension mismatch: state {len(psi)} vs operator {rho.shape}")
    return float(np.clip(np.real(psi.conj() @ rho @ psi), 0.0, 1.0))


def overlap(phi1, phi2) -> float:
    return float(abs(np.vdot(np.asarray(phi2).ravel(), np.asarray(phi1).ravel())))


def angular_distance(phi1, phi2) -> float:
    """arccos |<phi2|phi1>| in [0, pi/2].

    Evaluated as atan2(sin, cos) so that small angles keep full precision.
    """
    phi1 = np.asarray(phi1, dtype=np.complex128).ravel()
    phi2 = np.asarray(phi2, dtype=np.complex128).ravel()
    if phi1.shape != phi2.shape:
        raise ValueError("dimension mismatch")
    phi1 = phi1 / np.linalg.norm(phi1)
    phi2 = phi2 / np.linalg.norm(phi2)
    c = np.vdot(phi1, phi2)
    perp = np.linalg.norm(phi2 - c * phi1)
    return float(np.arctan2(perp, abs(c)))


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    return normalize(rng.normal(size=n) + 1j * rng.normal(size=n))


def random_hermitian(n: int, rng: np.random.Generator, norm: float | None = 1.0) -> np.ndarray:
    """GUE-like Hermitian matrix, rescaled to operator norm ``norm`` unless None."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (a + a.conj().T) / 2
    if norm is not None:
        h *= norm / np.max(np.abs(np.linalg.eigvalsh(h)))
    return h


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
