"""Dense spectral machinery at desk scale.

Symmetric eigendecomposition, the graph Fourier transform, exact
inverse-filter smoothers, and a brute-force Sylvester solver. These
routines favor exactness over speed: they are the reference against
which the iterative filter is checked, so they share no code with it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp

SIZE_GUARD = 2000
KRON_GUARD = 4096


def _dense(M) -> np.ndarray:
    if sp.issparse(M):
        return M.toarray().astype(np.float64)
    return np.asarray(M, dtype=np.float64)


def _check_symmetric(M: np.ndarray, tol: float = 1e-10) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] > SIZE_GUARD:
        raise ValueError(f"matrix of size {M.shape[0]} exceeds desk-scale guard {SIZE_GUARD}")
    if M.size and np.max(np.abs(M - M.T)) > tol:
        raise ValueError("matrix is not symmetric within 1e-10")


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order; eigenvector columns orthonormal."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.T


def symmetric_eig(M) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    Raises if the input is not symmetric within 1e-10 or larger than the
    desk-scale guard.
    """
    A = _dense(M)
    _check_symmetric(A)
    w, U = np.linalg.eigh(A)
    return EigenDecomposition(eigenvalues=w, eigenvectors=U)


def gft(U: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Graph Fourier transform: project a signal onto the eigenbasis, U^T x."""
    U = np.asarray(U, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if U.shape[0] != x.shape[0]:
        raise ValueError(f"dimension mismatch: U {U.shape}, x {x.shape}")
    return U.T @ x


def igft(U: np.ndarray, xhat: np.ndarray) -> np.ndarray:
    """Inverse graph Fourier transform, U xhat."""
    U = np.asarray(U, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if U.shape[1] != xhat.shape[0]:
        raise ValueError(f"dimension mismatch: U {U.shape}, xhat {xhat.shape}")
    return U @ xhat


def apply_spectral_filter(L, g: Callable[[float], float], X) -> np.ndarray:
    """Apply the spectral filter U g(Lambda) U^T X.

    `g` is a scalar function evaluated on each eigenvalue of L.
    """
    decomp = symmetric_eig(L)
    gvals = np.array([float(g(lam)) for lam in decomp.eigenvalues])
    X = np.asarray(X, dtype=np.float64)
    U = decomp.eigenvectors
    return U @ ((gvals[:, None] if X.ndim == 2 else gvals) * (U.T @ X))


def exact_smoother(L, lam: float, F) -> np.ndarray:
    """Solve (I + lam*L) Y = F, the minimizer of ||Y-F||_F^2 + lam*tr(Y^T L Y).

    Uses a dense Cholesky solve; valid for PSD L and lam >= 0, where the
    system is symmetric positive definite.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    A = _dense(L)
    _check_symmetric(A)
    F = np.asarray(F, dtype=np.float64)
    if F.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: L {A.shape}, F {F.shape}")
    system = np.eye(A.shape[0]) + lam * A
    c, low = scipy.linalg.cho_factor(system)
    return scipy.linalg.cho_solve((c, low), F)


def solve_sylvester(L1, L2, lam1: float, lam2: float, F) -> np.ndarray:
    """Brute-force solution of (I + lam1*L1) Y + lam2 * Y L2 = F.

    Builds the full (n*d) x (n*d) Kronecker system and solves it with a
    partial-pivot LU factorization. Guarded to n*d <= 4096 so the dense
    system stays small. The residual of the returned Y is checked against
    1e-8; PSD inputs cannot make the system singular, and a detected
    singularity is reported as an error.
    """
    A1 = _dense(L1)
    A2 = _dense(L2)
    F = np.asarray(F, dtype=np.float64)
    n, d = F.shape
    if A1.shape != (n, n) or A2.shape != (d, d):
        raise ValueError(f"dimension mismatch: L1 {A1.shape}, L2 {A2.shape}, F {F.shape}")
    if n * d > KRON_GUARD:
        raise ValueError(f"n*d = {n * d} exceeds Kronecker guard {KRON_GUARD}")
    # Row-major vec convention: vec(A Y B) = (A kron B^T) vec(Y).
    system = (
        np.eye(n * d)
        + lam1 * np.kron(A1, np.eye(d))
        + lam2 * np.kron(np.eye(n), A2.T)
    )
    try:
        y = np.linalg.solve(system, F.ravel())
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular Kronecker system (non-PSD input?): {exc}") from exc
    Y = y.reshape(n, d)
    residual = np.linalg.norm(Y - F + lam1 * (A1 @ Y) + lam2 * (Y @ A2))
    if residual >= 1e-8 * max(1.0, np.linalg.norm(F)):
        raise ValueError(f"Sylvester residual {residual:.3e} exceeds tolerance")
    return Y
