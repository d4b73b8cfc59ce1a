"""Data-driven priors: stacked per-sample bounds and their primal form via dualization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import matops
from .errors import HeterogeneousSamples, RankDeficient, SingularWeight
from .qmi import Orientation, Qmi, _swap, dualize
from .reparam import RegressionSample

DELTA = 1e-9


@dataclass(frozen=True)
class StackedSample:
    X_st: np.ndarray
    Y_st: np.ndarray
    Q: np.ndarray
    R_blocks: np.ndarray
    N: int


def stack_samples(samples: Sequence[RegressionSample]) -> StackedSample:
    """Concatenate samples horizontally; the combined bound weights each block by ``N R``."""
    samples = list(samples)
    if not samples:
        raise HeterogeneousSamples("no samples given")
    s0 = samples[0]
    for s in samples[1:]:
        if s.dims != s0.dims or not (np.array_equal(s.Q, s0.Q) and np.array_equal(s.R, s0.R)):
            raise HeterogeneousSamples("samples differ in dimensions or disturbance weights")
    N = len(samples)
    X_st = np.hstack([s.X for s in samples])
    Y_st = np.hstack([s.Y for s in samples])
    R_blocks = matops.blkdiag(*([N * s0.R] * N))
    return StackedSample(X_st, Y_st, s0.Q, R_blocks, N)


def stacked_bound_margin(D, Q, R, N: int) -> float:
    """Smallest eigenvalue of ``diag(N R, ..., N R) - D^T Q D`` for ``D = [d_1 ... d_N]``."""
    D = matops.as_matrix(D)
    Rc = matops.blkdiag(*([N * matops.as_matrix(R)] * N))
    return matops.min_eig(Rc - D.T @ matops.as_matrix(Q) @ D)


def _regularized_inverse(M, delta: float) -> np.ndarray:
    M = matops.symmetrize(M)
    scale = float(np.linalg.norm(M, 2))
    Mr = M + delta * max(scale, 1e-300) * np.eye(M.shape[0])
    if not matops.is_pd(Mr):
        raise SingularWeight("weight is not positive definite")
    return np.linalg.inv(Mr)


def _dual_weight(X, Y, Q, R, delta: float) -> np.ndarray:
    """Dual-orientation weight (variable ``theta^T``) of ``{theta : Q^-1 - (Y - theta X) R^-1 (.)^T > 0}``."""
    Q = matops.symmetrize(Q)
    if not matops.is_pd(Q):
        raise SingularWeight("Q must be positive definite for dualization")
    Rinv = _regularized_inverse(R, delta)
    XR = X @ Rinv
    YR = Y @ Rinv
    M = np.block([[-XR @ X.T, XR @ Y.T], [YR @ X.T, np.linalg.inv(Q) - YR @ Y.T]])
    return 0.5 * (M + M.T)


def consistency_set_dual(st: StackedSample, delta: float = DELTA) -> Qmi:
    """Strict set of ``theta`` consistent with the stacked bound, as a dual-orientation QMI.

    The variable of the returned QMI is ``theta^T`` (shape ``n x p``). In the
    ``[I_p; theta^T]`` layout its weight is ``[[Q^-1 - Y R_c^-1 Y^T, Y R_c^-1
    X^T], [X R_c^-1 Y^T, -X R_c^-1 X^T]]``; see :func:`dual_layout`.
    """
    n, p = st.X_st.shape[0], st.Y_st.shape[0]
    M = _dual_weight(st.X_st, st.Y_st, st.Q, st.R_blocks, delta)
    return Qmi(n, p, M, Orientation.DUAL)


def dual_layout(q: Qmi) -> np.ndarray:
    """Weight of a dual QMI rearranged to act on ``[I; theta^T]`` instead of ``[theta^T; I]``."""
    J = _swap(q.n, q.p)
    return J.T @ q.pi @ J


def prior_from_data(samples: Sequence[RegressionSample], delta: float = DELTA) -> Qmi:
    st = stack_samples(samples)
    n = st.X_st.shape[0]
    if np.linalg.matrix_rank(st.X_st) < n:
        raise RankDeficient("stacked regressor must have full row rank")
    return dualize(consistency_set_dual(st, delta))


def informativity_prior(
    samples: Sequence[RegressionSample],
    weights: Sequence[float] | None = None,
    delta: float = DELTA,
) -> Qmi:
    """Fixed nonnegative combination of per-sample dual QMIs, then dualized.

    The default weights ``1/N`` reproduce the stacked set of
    :func:`prior_from_data` exactly: the summed dual weights coincide with
    the stacked weight built from ``N R`` blocks.
    """
    samples = list(samples)
    N = len(samples)
    if weights is None:
        weights = [1.0 / N] * N
    if len(weights) != N or any(w < 0 for w in weights):
        raise ValueError("need one nonnegative weight per sample")
    s0 = samples[0]
    n, p = s0.X.shape[0], s0.Y.shape[0]
    M = sum(w * _dual_weight(s.X, s.Y, s.Q, s.R, delta) for w, s in zip(weights, samples))
    X_st = np.hstack([s.X for s in samples])
    if np.linalg.matrix_rank(X_st) < n:
        raise RankDeficient("stacked regressor must have full row rank")
    return dualize(Qmi(n, p, M, Orientation.DUAL))


def consistent_with_all(samples: Sequence[RegressionSample], theta, tol: float = 0.0) -> bool:
    """``theta`` satisfies every per-sample bound ``R - (Y - theta X)^T Q (.) >= 0``."""
    th = matops.as_matrix(theta)
    for s in samples:
        W = s.Y - th @ s.X
        if matops.min_eig(s.R - W.T @ s.Q @ W) < -tol:
            return False
    return True
