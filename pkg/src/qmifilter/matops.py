"""Dense real-matrix primitives: pseudoinverses, projectors, definiteness tests."""

from __future__ import annotations

import numpy as np

from .errors import InconsistentInverse, NotPsd, NotSymmetric, RankDeficient

RANK_TOL = 1e-9
SYM_TOL = 1e-8


def as_matrix(M) -> np.ndarray:
    """Return ``M`` as a 2-D float array (scalars become 1x1)."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        return A.reshape(1, 1)
    if A.ndim == 1:
        return A.reshape(-1, 1)
    return A


def symmetrize(M, tol: float = SYM_TOL) -> np.ndarray:
    """Return (M + M^T)/2, rejecting inputs whose asymmetry exceeds ``tol * max|M|``."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"matrix of shape {A.shape} is not square")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > tol * scale:
        raise NotSymmetric(f"asymmetry {np.max(np.abs(A - A.T)):.3e} exceeds tolerance")
    return 0.5 * (A + A.T)


def extremal_singular_values(M) -> tuple[float, float]:
    A = as_matrix(M)
    if A.size == 0:
        return 0.0, 0.0
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[-1]), float(s[0])


def has_full_column_rank(X, tol: float = RANK_TOL) -> bool:
    A = as_matrix(X)
    if A.shape[1] > A.shape[0]:
        return False
    s = np.linalg.svd(A, compute_uv=False)
    return bool(s[-1] > tol * max(1.0, s[0]))


def left_pinv(X, tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose left inverse of a full-column-rank ``X`` via SVD.

    Raises :class:`RankDeficient` if the smallest singular value is below
    ``tol * max(1, sigma_max)``.
    """
    A = as_matrix(X)
    n, m = A.shape
    if m > n:
        raise RankDeficient(f"{n}x{m} matrix cannot have full column rank")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[-1] <= tol * max(1.0, s[0]):
        raise RankDeficient(f"sigma_min={s[-1]:.3e}, sigma_max={s[0]:.3e}")
    return (Vt.T / s) @ U.T


def right_pinv(E, tol: float = RANK_TOL) -> np.ndarray:
    """Right inverse of a full-row-rank ``E`` (E @ result = I)."""
    return left_pinv(as_matrix(E).T, tol).T


def complement_projector(X, G, tol: float = 1e-10) -> np.ndarray:
    """Projector I - XG onto the complement of range(X) along ker(G)."""
    X = as_matrix(X)
    G = as_matrix(G)
    m = X.shape[1]
    if G.shape != (m, X.shape[0]):
        raise InconsistentInverse(f"G has shape {G.shape}, expected {(m, X.shape[0])}")
    if np.max(np.abs(G @ X - np.eye(m))) > tol * max(1.0, np.max(np.abs(G)) * np.max(np.abs(X))):
        raise InconsistentInverse("G X differs from the identity")
    return np.eye(X.shape[0]) - X @ G


def psd_sqrt(M, tol: float = 1e-9) -> np.ndarray:
    S = symmetrize(M)
    w, V = np.linalg.eigh(S)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w[0] < -tol * scale:
        raise NotPsd(f"eigenvalue {w[0]:.3e} below -tol")
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def inertia(M, tol: float = 1e-9) -> tuple[int, int, int]:
    """Counts of (negative, zero, positive) eigenvalues with threshold ``tol``."""
    w = np.linalg.eigvalsh(symmetrize(M))
    n_neg = int(np.sum(w < -tol))
    n_pos = int(np.sum(w > tol))
    return n_neg, len(w) - n_neg - n_pos, n_pos


def min_eig(M) -> float:
    return float(np.linalg.eigvalsh(symmetrize(M))[0])


def max_eig(M) -> float:
    return float(np.linalg.eigvalsh(symmetrize(M))[-1])


def is_psd(M, tol: float = 0.0) -> bool:
    return min_eig(M) >= -tol


def is_pd(M, tol: float = 0.0) -> bool:
    return min_eig(M) > tol


def blkdiag(*blocks) -> np.ndarray:
    mats = [as_matrix(b) for b in blocks]
    rows = sum(b.shape[0] for b in mats)
    cols = sum(b.shape[1] for b in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in mats:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out
