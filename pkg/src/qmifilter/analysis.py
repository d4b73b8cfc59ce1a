"""Discrete-time state-space analysis: stability, H-infinity norm, error systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import matops, sdp
from .errors import DimensionMismatch, Unbounded, Unstable
from .qmi import Qmi, center_and_radius, contains

GRID_POINTS = 512


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A, B, C, D = (matops.as_matrix(M) for M in (self.A, self.B, self.C, self.D))
        nx = A.shape[0]
        if A.shape != (nx, nx) or B.shape[0] != nx or C.shape[1] != nx or D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"A {A.shape}, B {B.shape}, C {C.shape}, D {D.shape}")
        for name, v in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, v)

    @property
    def nx(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class Estimator:
    A_E: np.ndarray
    B_E: np.ndarray
    C_E: np.ndarray
    D_E: np.ndarray

    def __post_init__(self):
        for name in ("A_E", "B_E", "C_E", "D_E"):
            object.__setattr__(self, name, matops.as_matrix(getattr(self, name)))
        StateSpace(self.A_E, self.B_E, self.C_E, self.D_E)  # dimension check


def spectral_radius(A) -> float:
    A = matops.as_matrix(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def dc_gain(sys: StateSpace) -> np.ndarray:
    if sys.nx == 0:
        return sys.D
    return sys.C @ np.linalg.solve(np.eye(sys.nx) - sys.A, sys.B) + sys.D


def freq_response(sys: StateSpace, omegas) -> np.ndarray:
    """``H(e^{jw})`` for each frequency, stacked along axis 0."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    if sys.nx == 0:
        return np.broadcast_to(sys.D.astype(complex), (len(w),) + sys.D.shape).copy()
    z = np.exp(1j * w)
    M = z[:, None, None] * np.eye(sys.nx)[None] - sys.A[None]
    X = np.linalg.solve(M, np.broadcast_to(sys.B.astype(complex), (len(w),) + sys.B.shape))
    return sys.C[None] @ X + sys.D[None]


def sigma_max_response(sys: StateSpace, omegas) -> np.ndarray:
    H = freq_response(sys, omegas)
    if H.shape[1] == 0 or H.shape[2] == 0:
        return np.zeros(H.shape[0])
    return np.linalg.svd(H, compute_uv=False)[:, 0]


def hinf_grid(sys: StateSpace, points: int = GRID_POINTS, refine: int = 5) -> float:
    """Peak gain over a frequency grid on ``[0, pi]`` with local refinement around the top peaks.

    The grid is augmented by the pole angles so that lightly damped
    resonances are not skipped.
    """
    grid = np.linspace(0.0, np.pi, points)
    if sys.nx:
        ang = np.abs(np.angle(np.linalg.eigvals(sys.A)))
        grid = np.unique(np.r_[grid, ang])
    g = sigma_max_response(sys, grid)
    best = float(np.max(g))
    order = np.argsort(g)[::-1]
    seen = []
    for idx in order:
        if len(seen) >= refine:
            break
        if any(abs(idx - s) <= 1 for s in seen):
            continue
        seen.append(idx)
        lo = grid[max(idx - 1, 0)]
        hi = grid[min(idx + 1, len(grid) - 1)]
        if hi <= lo:
            continue
        res = minimize_scalar(
            lambda w: -sigma_max_response(sys, [w])[0],
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, float(-res.fun))
    return best


def bounded_real_margin(sys: StateSpace, gamma: float, settings: sdp.SolverSettings | None = None) -> float:
    """Largest ``t`` with ``P >= t I`` and the bounded-real LMI at level ``gamma`` ``<= -t I``.

    A positive value certifies ``||H||_inf < gamma`` and stability.
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    nx, m = B.shape
    p = C.shape[0]
    prob = sdp.LmiProblem()
    P = prob.symmetric("P", nx)
    t = prob.scalar("t")
    L = sdp.bmat([
        [A.T @ P @ A - P, A.T @ P @ B, C.T],
        [B.T @ P @ A, B.T @ P @ B - gamma * np.eye(m), D.T],
        [C, D, -gamma * np.eye(p)],
    ])
    prob.add_lmi(-L - t * np.eye(nx + m + p), "bounded_real")
    prob.add_lmi(P - t * np.eye(nx), "lyapunov")
    prob.minimize(-t)
    sol = sdp.solve(prob, settings)
    if sol.status is sdp.Status.INFEASIBLE:
        return -np.inf
    return float(sol.values["t"])


def hinf_lmi(sys: StateSpace, lo: float, hi: float, rel_tol: float = 1e-6, feas_tol: float = 1e-12) -> float:
    """Bisection on the bounded-real LMI between a known lower and upper bound; returns the upper end.

    A level counts as feasible when its margin exceeds ``feas_tol * max(1, level)``;
    callers should pass a system scaled to unit gain so the threshold is meaningful.
    """
    while hi - lo > rel_tol * max(hi, 1e-12):
        mid = 0.5 * (lo + hi)
        if bounded_real_margin(sys, mid) > feas_tol * max(1.0, mid):
            hi = mid
        else:
            lo = mid
    return hi


def hinf_norm(sys: StateSpace, tol: float = 1e-6, method: str = "both") -> float:
    """H-infinity norm of a stable discrete-time system.

    ``method="both"`` brackets the norm between the static/DC lower bound and
    1.5 times the refined grid peak, bisects the bounded-real LMI to relative
    width ``tol`` and returns the larger of the grid and LMI estimates.
    ``"grid"`` skips the LMI stage.
    """
    if spectral_radius(sys.A) >= 1.0:
        raise Unstable(f"spectral radius {spectral_radius(sys.A):.6f} >= 1")
    grid = hinf_grid(sys)
    if method == "grid":
        return grid
    if method not in ("both", "lmi"):
        raise ValueError(f"unknown method {method!r}")
    lower = max(matops.extremal_singular_values(sys.D)[1], matops.extremal_singular_values(dc_gain(sys))[1])
    if grid <= 1e-14:
        return grid
    # bisect on the system scaled to unit peak gain: the margin threshold is then scale free
    unit = StateSpace(sys.A, sys.B, sys.C / grid, sys.D / grid)
    lmi = grid * hinf_lmi(unit, min(lower / grid, 1.0) * (1 - 1e-9), 1.5, tol)
    return lmi if method == "lmi" else max(grid, lmi)


def series(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """``g2`` after ``g1``."""
    n1, n2 = g1.nx, g2.nx
    A = np.block([[g1.A, np.zeros((n1, n2))], [g2.B @ g1.C, g2.A]])
    B = np.vstack([g1.B, g2.B @ g1.D])
    C = np.hstack([g2.D @ g1.C, g2.C])
    return StateSpace(A, B, C, g2.D @ g1.D)


def split_delta(Delta, nx: int, mp: int) -> tuple:
    """``Delta = [[A, B_p], [C_y, D_yp]]`` -> ``(A, B_p, C_y, D_yp)``."""
    Dl = matops.as_matrix(Delta)
    return Dl[:nx, :nx], Dl[:nx, nx:nx + mp], Dl[nx:, :nx], Dl[nx:, nx:nx + mp]


def closed_loop_error_system(A, B_p, C_y, D_yp, C_p, D_p, est: Estimator) -> StateSpace:
    """System from ``w_p`` to ``z_p - z_p_hat`` with state ``[x; x_hat]``."""
    A, B_p, C_y, D_yp, C_p, D_p = (matops.as_matrix(M) for M in (A, B_p, C_y, D_yp, C_p, D_p))
    nx = A.shape[0]
    if est.A_E.shape != (nx, nx) and est.A_E.size:
        raise DimensionMismatch("estimator order differs from plant order")
    ne = est.A_E.shape[0]
    try:
        Acl = np.block([[A, np.zeros((nx, ne))], [est.B_E @ C_y, est.A_E]])
        Bcl = np.vstack([B_p, est.B_E @ D_yp])
        Ccl = np.hstack([C_p - est.D_E @ C_y, -est.C_E])
        Dcl = D_p - est.D_E @ D_yp
    except ValueError as exc:
        raise DimensionMismatch(str(exc)) from exc
    return StateSpace(Acl, Bcl, Ccl, Dcl)


def sample_members(q: Qmi, count: int, seed: int = 0, boundary_fraction: float = 0.2) -> list:
    """Witness points of a bounded primal QMI: the center, boundary points and interior points.

    Points are ``center + K^{-1/2} U S^{1/2}`` with ``U`` a random direction
    scaled to spectral norm ``r``; ``r = 1`` for the boundary fraction and
    ``r = u^(1/(p n))`` otherwise. Coverage is heuristic, not uniform.
    """
    cr = center_and_radius(q)
    if cr is None:
        raise Unbounded("QMI is unbounded (P11 not negative definite)")
    c, K, S = cr
    w = np.linalg.eigvalsh(S)
    if w.size and w[0] < -1e-9 * max(1.0, float(np.max(np.abs(q.pi)))):
        raise Unbounded("QMI describes an empty set")
    Kih = np.linalg.inv(matops.psd_sqrt(K))
    Sh = matops.psd_sqrt(S if w[0] >= 0 else S - w[0] * np.eye(q.n))
    rng = np.random.default_rng(seed)
    out = [c.copy()]
    n_boundary = max(1, int(np.ceil(boundary_fraction * (count - 1)))) if count > 1 else 0
    dim = q.p * q.n
    for i in range(1, count):
        U = rng.standard_normal((q.p, q.n))
        U /= np.linalg.norm(U)
        r = 1.0 if i <= n_boundary else rng.uniform() ** (1.0 / dim)
        smax = np.linalg.norm(U, 2)
        U *= r / smax
        theta = c + Kih @ U @ Sh
        for _ in range(20):
            if contains(q, theta, 1e-9):
                break
            U *= 1.0 - 1e-6
            theta = c + Kih @ U @ Sh
        else:
            theta = c.copy()
        out.append(theta)
    return out[:count]
