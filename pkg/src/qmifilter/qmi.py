"""Quadratic matrix inequality (QMI) sets over a matrix variable.

A :class:`Qmi` with partitioned weight ``pi = [[P11, P12], [P12^T, P22]]``
(``P11`` is ``p x p``, ``P22`` is ``n x n``) describes

    { V in R^{p x n} : [V; I_n]^T pi [V; I_n] >= 0 }.

For ``Orientation.PRIMAL`` the variable ``V`` is the parameter matrix
``theta`` itself. For ``Orientation.DUAL`` the variable is the transpose
``theta^T`` and the inequality is read strictly; equivalently the set is
``{theta : [I; theta^T]^T (J^T pi J) [I; theta^T] > 0}`` with ``J`` the
block swap. :func:`dualize` maps one orientation to the other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matops
from .errors import (
    DimensionMismatch,
    NegativeMultiplier,
    NotPsd,
    Singular,
    WrongInertia,
)


class Orientation(enum.Enum):
    PRIMAL = "primal"
    DUAL = "dual"

    def flipped(self) -> "Orientation":
        return Orientation.DUAL if self is Orientation.PRIMAL else Orientation.PRIMAL


@dataclass(frozen=True)
class Qmi:
    p: int
    n: int
    pi: np.ndarray
    orientation: Orientation = Orientation.PRIMAL

    def __post_init__(self):
        pi = matops.symmetrize(self.pi)
        if pi.shape != (self.p + self.n, self.p + self.n):
            raise DimensionMismatch(
                f"pi has shape {pi.shape}, expected {(self.p + self.n,) * 2}"
            )
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @property
    def p11(self) -> np.ndarray:
        return self.pi[: self.p, : self.p]

    @property
    def p12(self) -> np.ndarray:
        return self.pi[: self.p, self.p:]

    @property
    def p22(self) -> np.ndarray:
        return self.pi[self.p:, self.p:]

    def scaled(self, alpha: float) -> "Qmi":
        return Qmi(self.p, self.n, alpha * self.pi, self.orientation)

    def normalized(self) -> "Qmi":
        """Same set, weight rescaled to unit spectral norm."""
        nrm = float(np.linalg.norm(self.pi, 2))
        return self if nrm == 0.0 else self.scaled(1.0 / nrm)

    def inflated(self, delta: float = 1e-9) -> "Qmi":
        """Add ``delta * I`` to the weight; the result strictly contains the original set."""
        return Qmi(self.p, self.n, self.pi + delta * np.eye(self.p + self.n), self.orientation)


@dataclass(frozen=True)
class MultiplierVector:
    taus: tuple = field(default_factory=tuple)
    lambdas: tuple = field(default_factory=tuple)

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        lambdas = tuple(float(v) for v in self.lambdas)
        if any(v < 0 for v in taus + lambdas):
            raise NegativeMultiplier("multipliers must be nonnegative")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "lambdas", lambdas)

    def all(self) -> tuple:
        return self.taus + self.lambdas


def _check_var(q: Qmi, theta) -> np.ndarray:
    V = matops.as_matrix(theta)
    if V.shape != (q.p, q.n):
        raise DimensionMismatch(f"variable has shape {V.shape}, expected {(q.p, q.n)}")
    return V


def evaluate(q: Qmi, theta) -> np.ndarray:
    """Return ``[V; I]^T pi [V; I]`` (an ``n x n`` symmetric matrix)."""
    V = _check_var(q, theta)
    F = V.T @ q.p11 @ V + V.T @ q.p12 + q.p12.T @ V + q.p22
    return 0.5 * (F + F.T)


def evaluate_many(q: Qmi, thetas: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate` over a stack of shape ``(K, p, n)``."""
    V = np.asarray(thetas, dtype=float)
    if V.ndim != 3 or V.shape[1:] != (q.p, q.n):
        raise DimensionMismatch(f"stack has shape {V.shape}, expected (K, {q.p}, {q.n})")
    VtP12 = np.einsum("kij,il->kjl", V, q.p12)
    F = np.einsum("kij,il,klm->kjm", V, q.p11, V) + VtP12 + VtP12.transpose(0, 2, 1) + q.p22
    return 0.5 * (F + F.transpose(0, 2, 1))


def min_eig_many(q: Qmi, thetas: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(evaluate_many(q, thetas))[:, 0]


def contains(q: Qmi, theta, tol: float = 1e-9) -> bool:
    return matops.min_eig(evaluate(q, theta)) >= -tol


def contains_many(q: Qmi, thetas: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    return min_eig_many(q, thetas) >= -tol


def from_center_shape(Q, S, theta_hat) -> Qmi:
    """QMI for ``{theta : S - (theta - theta_hat)^T Q (theta - theta_hat) >= 0}``."""
    Q = matops.symmetrize(Q)
    S = matops.symmetrize(S)
    C = matops.as_matrix(theta_hat)
    p, n = C.shape
    if Q.shape != (p, p) or S.shape != (n, n):
        raise DimensionMismatch("Q, S and theta_hat have inconsistent sizes")
    if not matops.is_psd(Q, 1e-10 * max(1.0, np.max(np.abs(Q)))):
        raise NotPsd("Q must be positive semidefinite")
    QC = Q @ C
    pi = np.block([[-Q, QC], [QC.T, S - C.T @ QC]])
    return Qmi(p, n, pi)


def ball_prior(center, beta: float) -> Qmi:
    """``{theta : sigma_max(theta - center) <= beta}``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    C = matops.as_matrix(center)
    p, n = C.shape
    return from_center_shape(np.eye(p), beta**2 * np.eye(n), C)


def bounded_center(q: Qmi, tol: float = 1e-12):
    """Center ``-P11^{-1} P12`` of a bounded QMI, or ``None`` when ``P11`` is not negative definite."""
    scale = max(1.0, float(np.max(np.abs(q.pi))))
    if matops.max_eig(q.p11) >= -tol * scale:
        return None
    return -np.linalg.solve(q.p11, q.p12)


def center_and_radius(q: Qmi):
    """Return ``(center, K, S)`` with the set written as ``S - (V - center)^T K (V - center) >= 0``.

    Requires a bounded QMI (``P11`` negative definite).
    """
    c = bounded_center(q)
    if c is None:
        return None
    K = -q.p11
    S = q.p22 + q.p12.T @ c
    return c, 0.5 * (K + K.T), 0.5 * (S + S.T)


def _swap(p: int, n: int) -> np.ndarray:
    """Permutation ``J`` with ``J [a; b] = [b; a]`` for ``a`` of length p, ``b`` of length n."""
    J = np.zeros((p + n, p + n))
    J[:n, p:] = np.eye(n)
    J[n:, :p] = np.eye(p)
    return J


def dualize(q: Qmi, tol: float = 1e-9) -> Qmi:
    """Strict membership of ``V`` in ``q`` iff ``V^T`` is a strict member of the result.

    The weight must be nonsingular with exactly ``p`` negative and ``n``
    positive eigenvalues. The returned weight is ``-J S pi^{-1} S J^T``
    with ``S = diag(I_p, -I_n)``; applying the map twice returns ``pi``.
    """
    w = np.linalg.eigvalsh(q.pi)
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.min(np.abs(w)) <= tol * scale:
        raise Singular(f"weight has eigenvalue {w[np.argmin(np.abs(w))]:.3e}")
    n_neg = int(np.sum(w < 0))
    if n_neg != q.p:
        raise WrongInertia(f"expected {q.p} negative and {q.n} positive eigenvalues, got {n_neg} negative")
    S = np.diag(np.r_[np.ones(q.p), -np.ones(q.n)])
    J = _swap(q.p, q.n)
    inv = np.linalg.inv(q.pi)
    M = -J @ S @ inv @ S @ J.T
    return Qmi(q.n, q.p, 0.5 * (M + M.T), q.orientation.flipped())


def nonneg_combination(qmis: Sequence[Qmi], mult: MultiplierVector) -> Qmi:
    """Weighted sum ``sum_i m_i pi_i`` (taus first, then lambdas)."""
    qmis = list(qmis)
    weights = mult.all()
    if not qmis:
        raise DimensionMismatch("need at least one QMI")
    if len(weights) != len(qmis):
        raise DimensionMismatch(f"{len(weights)} multipliers for {len(qmis)} QMIs")
    q0 = qmis[0]
    pi = np.zeros_like(q0.pi)
    for q, w in zip(qmis, weights):
        if (q.p, q.n, q.orientation) != (q0.p, q0.n, q0.orientation):
            raise DimensionMismatch("QMIs differ in shape or orientation")
        pi = pi + w * q.pi
    return Qmi(q0.p, q0.n, pi, q0.orientation)


def intersection_contains(qmis: Sequence[Qmi], theta, tol: float = 1e-9) -> bool:
    return all(contains(q, theta, tol) for q in qmis)
