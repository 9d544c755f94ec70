"""Dense symmetric linear algebra: eigendecomposition, pseudo-inverse, inertia, congruence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

SYM_TOL = 1e-10
INERTIA_TOL = 1e-9
PINV_CUTOFF = 1e-12


class NotSymmetricError(ValueError):
    pass


class NotNegativeDefiniteError(ValueError):
    pass


def _require_symmetric(M: np.ndarray, tol: float = SYM_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {M.shape}")
    scale = 1.0 + np.abs(M).max(initial=0.0)
    if np.abs(M - M.T).max(initial=0.0) > tol * scale:
        raise NotSymmetricError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def sym_eigen(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in ascending order and orthonormal eigenvectors (columns)."""
    M = _require_symmetric(M)
    return np.linalg.eigh(M)


def sym_pinv(M, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via its eigendecomposition.

    Eigenvalues with ``|lam| <= cutoff * max|lam|`` are treated as zero.
    """
    lam, Q = sym_eigen(M)
    if lam.size == 0:
        return np.zeros_like(M, dtype=float)
    big = np.abs(lam).max()
    keep = np.abs(lam) > cutoff * big if big > 0 else np.zeros_like(lam, dtype=bool)
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    P = (Q * inv) @ Q.T
    return 0.5 * (P + P.T)


def pinv(M, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Moore-Penrose inverse of a general rectangular matrix (SVD based)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > cutoff * s.max() if s.max() > 0 else np.zeros_like(s, dtype=bool)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def svd(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD written as ``M = U @ R @ E`` with R rectangular-diagonal.

    Zero singular values are left in R; ``numerical_rank`` counts the
    positive ones.
    """
    M = np.asarray(M, dtype=float)
    U, s, E = np.linalg.svd(M, full_matrices=True)
    R = np.zeros(M.shape)
    k = min(M.shape)
    R[np.arange(k), np.arange(k)] = s
    return U, R, E


def numerical_rank(M, rtol: float = 1e-10) -> int:
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int((s > rtol * s[0]).sum())


@dataclass(frozen=True)
class Inertia:
    n_pos: int
    n_zero: int
    n_neg: int
    tol: float

    @property
    def dim(self) -> int:
        return self.n_pos + self.n_zero + self.n_neg

    @property
    def is_pos_def(self) -> bool:
        return self.n_zero == 0 and self.n_neg == 0

    @property
    def is_neg_def(self) -> bool:
        return self.n_zero == 0 and self.n_pos == 0

    @property
    def is_psd(self) -> bool:
        return self.n_neg == 0

    @property
    def is_nsd(self) -> bool:
        return self.n_pos == 0

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_pos, self.n_zero, self.n_neg)


def zero_band(M, rel_tol: float = INERTIA_TOL) -> float:
    """Absolute zero band ``rel_tol * (1 + ||M||_2)`` used for inertia counts."""
    M = np.asarray(M, dtype=float)
    norm = np.linalg.norm(M, 2) if M.size else 0.0
    return rel_tol * (1.0 + norm)


def inertia_of(M, tol: float | None = None) -> Inertia:
    """Count eigenvalues above ``tol``, within ``[-tol, tol]`` and below ``-tol``.

    ``tol`` is absolute; by default the relative zero band of :func:`zero_band`.
    """
    M = _require_symmetric(M)
    if tol is None:
        tol = zero_band(M)
    lam = np.linalg.eigvalsh(M) if M.size else np.zeros(0)
    n_pos = int((lam > tol).sum())
    n_neg = int((lam < -tol).sum())
    return Inertia(n_pos, lam.size - n_pos - n_neg, n_neg, float(tol))


@dataclass(frozen=True)
class CongruencePair:
    """``T'GT = -diag(lambdas)`` and ``T'ST = diag(a_values, 0, ..., 0)``."""

    T: np.ndarray
    lambdas: np.ndarray
    a_values: np.ndarray
    diag_S: np.ndarray  # full diagonal of T'ST, descending


def congruence_diagonalize(G, S, rank_tol: float = 1e-10) -> CongruencePair:
    """Simultaneously diagonalize a negative definite G and a PSD S by congruence.

    With the Cholesky factor -G = L L', the matrix L^-1 S L^-T is
    eigendecomposed as Q diag(a) Q' (eigenvalues descending), and
    T = L^-T Q gives T'GT = -I and T'ST = diag(a).
    """
    G = _require_symmetric(G)
    S = _require_symmetric(S)
    if G.shape != S.shape:
        raise ValueError("G and S must have the same shape")
    try:
        L = np.linalg.cholesky(-G)
    except np.linalg.LinAlgError as exc:
        raise NotNegativeDefiniteError("G is not negative definite") from exc
    if not inertia_of(G).is_neg_def:
        raise NotNegativeDefiniteError("G is not negative definite")
    Linv_S = sla.solve_triangular(L, S, lower=True)
    K = sla.solve_triangular(L, Linv_S.T, lower=True)
    a, Q = np.linalg.eigh(0.5 * (K + K.T))
    order = np.argsort(a)[::-1]
    a, Q = a[order], Q[:, order]
    T = sla.solve_triangular(L.T, Q, lower=False)
    # Columns already normalized so that T'GT = -I; record the scale explicitly.
    lambdas = -np.einsum("ij,ik,kj->j", T, G, T)
    cut = rank_tol * max(1.0, abs(a[0]) if a.size else 0.0)
    a = np.where(np.abs(a) <= cut, 0.0, a)
    return CongruencePair(T=T, lambdas=lambdas, a_values=a[a > 0], diag_S=a)
