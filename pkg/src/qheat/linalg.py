"""Small dense complex linear algebra: eigensystems, propagators, overlap matrices.

Everything here works on plain ``numpy`` arrays. Matrices in scope are tiny
(N <= 8) and O(1) in magnitude, so all tolerances are absolute.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonHermitianInput, NonUnitaryBasis

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``m`` as a Hermitian matrix and return it as a complex array."""
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonHermitianInput(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 2:
        raise NonHermitianInput("dimension must be at least 2")
    asym = float(np.max(np.abs(a - a.conj().T)))
    if asym > tol:
        raise NonHermitianInput(f"matrix is not Hermitian (max asymmetry {asym:.3e})")
    return a


def unitarity_defect(u: np.ndarray) -> float:
    """Largest entry of |U^dagger U - I|."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    a = np.array(u, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonUnitaryBasis(f"expected a square matrix, got shape {a.shape}")
    defect = unitarity_defect(a)
    if defect > tol:
        raise NonUnitaryBasis(f"basis is not orthonormal (max |U^dag U - I| = {defect:.3e})")
    return a


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues and the unitary whose column k is the k-th eigenvector."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.values)

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def eig_hermitian(m) -> EigenSystem:
    """Diagonalize a Hermitian matrix.

    Raises NonHermitianInput when ``m`` is not Hermitian within 1e-12.
    """
    a = as_hermitian(m)
    values, vectors = np.linalg.eigh(a)
    values = np.ascontiguousarray(values, dtype=float)
    vectors = np.ascontiguousarray(vectors, dtype=complex)
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenSystem(values, vectors)


def propagator(es: EigenSystem, tau: float) -> np.ndarray:
    """U(tau) = exp(-i H tau) built from the spectral decomposition (hbar = 1)."""
    tau = float(tau)
    if not np.isfinite(tau):
        raise ValueError(f"tau must be finite, got {tau}")
    phases = np.exp(-1j * es.values * tau)
    return (es.vectors * phases) @ es.vectors.conj().T


def overlap_stochastic(basis_a, basis_b) -> np.ndarray:
    """T[j, k] = |<a_j|b_k>|^2 for two orthonormal bases given as columns.

    The result is unistochastic, hence doubly stochastic.
    """
    a = check_unitary(basis_a)
    b = check_unitary(basis_b)
    return np.abs(a.conj().T @ b) ** 2
