"""Bounded primal QMI for a single regression sample, and structural-knowledge QMIs.

For ``Y = theta X + W`` with ``W`` bounded by ``R - W^T Q W >= 0`` and a
full-column-rank regressor ``X``, the set of consistent ``theta`` is
unbounded along ``ker(X^T)``. It is replaced by the ellipsoidal QMI

    S - (theta - theta_hat)^T Q (theta - theta_hat) >= 0,
    S = G^T (R + R_hat) G + G0^T Q_hat G0,   theta_hat = Y G + theta_bar G0,

with ``G`` the left pseudoinverse of ``X`` and ``G0 = I - X G``. The weight
``Q_hat`` is chosen by a small SDP over a prior set so that every consistent
``theta`` in the prior stays inside.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import matops, sdp
from .errors import (
    DimensionMismatch,
    Infeasible,
    NonPositiveEpsilon,
    NotPsd,
    RankDeficient,
    SolverFailure,
)
from .qmi import Orientation, Qmi, bounded_center, from_center_shape


class Objective(enum.Enum):
    TRACE = "trace"
    LOGDET = "logdet"


@dataclass(frozen=True)
class RegressionSample:
    X: np.ndarray
    Y: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        X = matops.as_matrix(self.X)
        Y = matops.as_matrix(self.Y)
        Q = matops.symmetrize(self.Q)
        R = matops.symmetrize(self.R)
        n, m = X.shape
        p = Y.shape[0]
        if Y.shape[1] != m or Q.shape != (p, p) or R.shape != (m, m):
            raise DimensionMismatch(f"X {X.shape}, Y {Y.shape}, Q {Q.shape}, R {R.shape}")
        if not (matops.is_psd(Q, 1e-12) and matops.is_psd(R, 1e-12)):
            raise NotPsd("disturbance weights must be positive semidefinite")
        for name, v in (("X", X), ("Y", Y), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, v)

    @property
    def dims(self) -> tuple:
        """``(p, n, m)``: rows of theta, columns of theta, columns of the sample."""
        return self.Y.shape[0], self.X.shape[0], self.X.shape[1]


@dataclass(frozen=True)
class ReparamConfig:
    epsilon: float = 0.1
    theta_bar: np.ndarray | None = None
    objective: Objective = Objective.TRACE


@dataclass(frozen=True)
class ReparamResult:
    qhat: np.ndarray
    rhat: np.ndarray
    gamma_sq: float
    lambdas: tuple
    sigma_hat: Qmi | None = None


def inflation_factor(epsilon: float) -> float:
    """``(1 + eps)^2 - 1``."""
    if not epsilon > 0:
        raise NonPositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    return (1.0 + epsilon) ** 2 - 1.0


def rhat_gamma_from_eps(R, epsilon: float) -> tuple[np.ndarray, float]:
    """Return ``(R_hat, gamma^2)`` with ``gamma^2 R_hat = R`` and ``R + R_hat = (1 + eps)^2 R``."""
    c = inflation_factor(epsilon)
    R = matops.symmetrize(R)
    if not matops.is_pd(R):
        raise NotPsd("R must be positive definite for a positive definite R_hat")
    return c * R, 1.0 / c


def qhat_problem(priors: Sequence[Qmi], Q, gamma_sq: float, theta_bar, weight=None):
    """Build the Q_hat SDP; returns ``(problem, qhat_expr, lambda_exprs, constraint_expr, scales)``."""
    priors = list(priors)
    if not priors:
        raise DimensionMismatch("at least one prior QMI is required")
    Q = matops.symmetrize(Q)
    Tb = matops.as_matrix(theta_bar)
    p, n = Tb.shape
    for q in priors:
        if q.orientation is not Orientation.PRIMAL or (q.p, q.n) != (p, n):
            raise DimensionMismatch("priors must be primal QMIs over the same theta shape")
    c = 1.0 + gamma_sq
    cQ = c * Q
    prob = sdp.LmiProblem()
    qhat = prob.symmetric("qhat", n, psd=True)
    # priors with very different magnitudes are normalized; lambdas are rescaled on return
    scales = [float(np.linalg.norm(q.pi, 2)) or 1.0 for q in priors]
    lams = [prob.scalar(f"lambda{i}", lower=0.0) for i in range(len(priors))]
    F = sdp.bmat([[-cQ, cQ @ Tb], [(cQ @ Tb).T, qhat - Tb.T @ cQ @ Tb]])
    for lam, q, s in zip(lams, priors, scales):
        F = F - lam * (q.pi / s)
    prob.add_lmi(F, "qhat_dominance")
    W = np.eye(n) if weight is None else weight
    prob.minimize(sdp.Affine(np.zeros((1, 1)), {k: np.array([[np.sum(W * c_)]]) for k, c_ in qhat.coefs.items()}))
    return prob, qhat, lams, F, scales


def solve_qhat(
    priors: Sequence[Qmi],
    Q,
    gamma_sq: float,
    theta_bar,
    objective: Objective = Objective.TRACE,
    settings: sdp.SolverSettings | None = None,
    logdet_iters: int = 8,
) -> tuple[np.ndarray, tuple]:
    """Smallest ``Q_hat`` (trace, or log-det by reweighted trace) dominating the prior.

    Returns ``(qhat, lambdas)``; raises :class:`Infeasible` if no ``Q_hat``
    exists, which happens when the prior is unbounded in a direction ``Q``
    penalizes.
    """
    weight = None
    qhat_val = lams_val = None
    iters = 1 if objective is Objective.TRACE else 1 + logdet_iters
    for it in range(iters):
        prob, qhat, lams, F, scales = qhat_problem(priors, Q, gamma_sq, theta_bar, weight)
        sol = sdp.solve(prob, settings)
        if it > 0 and not sol.ok:
            break  # every earlier iterate is feasible; keep the last good one
        if sol.status is sdp.Status.INFEASIBLE:
            raise Infeasible("no Q_hat dominates the prior; is the prior bounded?")
        if not sol.ok:
            raise SolverFailure(f"Q_hat SDP ended with {sol.raw_status}")
        qhat_val = sol.values["qhat"]
        lams_val = tuple(max(0.0, sol.values[f"lambda{i}"]) / s for i, s in enumerate(scales))
        # majorize-minimize step for log det(Q_hat + delta I): linearize at the current iterate
        n = qhat_val.shape[0]
        delta = 1e-6 * max(1.0, np.trace(qhat_val) / n)
        weight = np.linalg.inv(qhat_val + delta * np.eye(n))
        weight = 0.5 * (weight + weight.T) * (n / np.trace(weight))
    qhat_val = _repair_qhat(priors, Q, gamma_sq, theta_bar, 0.5 * (qhat_val + qhat_val.T), lams_val)
    return qhat_val, lams_val


def _repair_qhat(priors: Sequence[Qmi], Q, gamma_sq: float, theta_bar, qhat, lambdas) -> np.ndarray:
    """Shift ``Q_hat`` up by a multiple of the identity until the dominance LMI holds exactly.

    Solvers stop at a relative residual, which on badly scaled priors can
    leave a small absolute violation. With the multipliers fixed the
    constraint reads ``Q_hat >= M`` for a Schur complement ``M``; enlarging
    ``Q_hat`` only makes the resulting set more conservative.
    """
    Q = matops.symmetrize(Q)
    Tb = matops.as_matrix(theta_bar)
    p = Tb.shape[0]
    cQ = (1.0 + gamma_sq) * Q
    G = np.block([[-cQ, cQ @ Tb], [(cQ @ Tb).T, -Tb.T @ cQ @ Tb]])
    for lam, q in zip(lambdas, priors):
        G = G - lam * q.pi
    G = 0.5 * (G + G.T)
    G11, G12, G22 = G[:p, :p], G[:p, p:], G[p:, p:]
    scale = max(1.0, float(np.max(np.abs(G))))
    if matops.min_eig(G11) < -1e-12 * scale:
        return qhat  # multipliers too small to repair by Q_hat alone; leave the solver's answer
    M = -G22 + G12.T @ np.linalg.pinv(G11, rcond=1e-13) @ G12
    M = 0.5 * (M + M.T)
    shift = -matops.min_eig(qhat - M)
    if shift <= 0 and matops.min_eig(qhat) >= 0:
        return qhat
    n = qhat.shape[0]
    pad = 1e-12 * max(1.0, float(np.max(np.abs(M))))
    out = qhat + (max(shift, 0.0) + pad) * np.eye(n)
    w = matops.min_eig(out)
    if w < 0:
        out = out - w * np.eye(n)
    return out


def qhat_margin(priors: Sequence[Qmi], Q, gamma_sq: float, theta_bar, qhat, lambdas) -> float:
    """Smallest eigenvalue of the dominance constraint evaluated outside the solver."""
    Q = matops.symmetrize(Q)
    Tb = matops.as_matrix(theta_bar)
    cQ = (1.0 + gamma_sq) * Q
    F = np.block([[-cQ, cQ @ Tb], [(cQ @ Tb).T, qhat - Tb.T @ cQ @ Tb]])
    for lam, q in zip(lambdas, priors):
        F = F - lam * q.pi
    return matops.min_eig(F)


def reparameterize_sample(sample: RegressionSample, qhat, rhat, theta_bar) -> Qmi:
    X, Y, Q, R = sample.X, sample.Y, sample.Q, sample.R
    try:
        G = matops.left_pinv(X)
    except RankDeficient as exc:
        raise RankDeficient(f"regressor: {exc}") from exc
    G0 = matops.complement_projector(X, G)
    Tb = matops.as_matrix(theta_bar)
    theta_hat = Y @ G + Tb @ G0
    S = G.T @ (R + matops.symmetrize(rhat)) @ G + G0.T @ matops.symmetrize(qhat) @ G0
    return from_center_shape(Q, S, theta_hat)


def default_theta_bar(priors: Sequence[Qmi], p: int, n: int) -> np.ndarray:
    """Center of the first bounded prior, else zero."""
    for q in priors:
        c = bounded_center(q)
        if c is not None:
            return c
    return np.zeros((p, n))


class QhatCache:
    """Memo of ``solve_qhat`` keyed by (prior set, Q, epsilon, theta_bar, objective).

    Reads are lock-free; insertion is serialized.
    """

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(priors, Q, epsilon, theta_bar, objective) -> tuple:
        parts = [np.ascontiguousarray(q.pi).tobytes() for q in priors]
        return (
            tuple(parts),
            np.ascontiguousarray(matops.as_matrix(Q)).tobytes(),
            float(epsilon),
            np.ascontiguousarray(matops.as_matrix(theta_bar)).tobytes(),
            objective,
        )

    def get(self, key):
        return self._store.get(key)

    def put(self, key, value) -> None:
        with self._lock:
            self._store.setdefault(key, value)

    def __len__(self) -> int:
        return len(self._store)


def reparameterize(
    sample: RegressionSample,
    priors: Sequence[Qmi],
    config: ReparamConfig = ReparamConfig(),
    cache: QhatCache | None = None,
    settings: sdp.SolverSettings | None = None,
) -> ReparamResult:
    """Full pipeline for one sample: R_hat from epsilon, Q_hat from the prior, then the QMI."""
    p, n, _ = sample.dims
    theta_bar = config.theta_bar if config.theta_bar is not None else default_theta_bar(priors, p, n)
    rhat, gamma_sq = rhat_gamma_from_eps(sample.R, config.epsilon)
    key = QhatCache.key(priors, sample.Q, config.epsilon, theta_bar, config.objective)
    hit = cache.get(key) if cache is not None else None
    if hit is None:
        hit = solve_qhat(priors, sample.Q, gamma_sq, theta_bar, config.objective, settings)
        if cache is not None:
            cache.put(key, hit)
    qhat, lambdas = hit
    sigma_hat = reparameterize_sample(sample, qhat, rhat, theta_bar)
    return ReparamResult(qhat, rhat, gamma_sq, lambdas, sigma_hat)


def structural_sample(E, F, Gc, eps_s: float) -> RegressionSample:
    """Rewrite ``sigma_max(E theta F + Gc) <= eps_s`` as a regression sample.

    With ``E`` of full row rank the constraint reads ``[theta F + E^+ Gc; I]^T
    diag(-E^T E, eps_s^2 I) [.; I] >= 0``, i.e. regressor ``F``, regressand
    ``-E^+ Gc``, weights ``Q = E^T E`` and ``R = eps_s^2 I``.
    """
    E = matops.as_matrix(E)
    F = matops.as_matrix(F)
    Gc = matops.as_matrix(Gc)
    if eps_s <= 0:
        raise NonPositiveEpsilon("structural tolerance must be positive")
    try:
        Epinv = matops.right_pinv(E)
    except RankDeficient as exc:
        raise RankDeficient(f"E must have full row rank: {exc}") from exc
    if not matops.has_full_column_rank(F):
        raise RankDeficient("F must have full column rank")
    if Gc.shape != (E.shape[0], F.shape[1]):
        raise DimensionMismatch(f"Gc has shape {Gc.shape}, expected {(E.shape[0], F.shape[1])}")
    return RegressionSample(F, -Epinv @ Gc, E.T @ E, eps_s**2 * np.eye(F.shape[1]))


def structural_constraint_qmi(
    E,
    F,
    Gc,
    eps_s: float,
    priors: Sequence[Qmi],
    config: ReparamConfig = ReparamConfig(),
    cache: QhatCache | None = None,
    settings: sdp.SolverSettings | None = None,
) -> Qmi:
    s = structural_sample(E, F, Gc, eps_s)
    return reparameterize(s, priors, config, cache, settings).sigma_hat


def entry_selector(shape: tuple, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """``(E, F)`` such that ``E theta F`` is the scalar ``theta[i, j]``."""
    p, n = shape
    E = np.zeros((1, p))
    E[0, i] = 1.0
    F = np.zeros((n, 1))
    F[j, 0] = 1.0
    return E, F
