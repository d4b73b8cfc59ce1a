"""Random instance generators and independent oracles shared by the tests."""

import numpy as np

from qmifilter import qmi


def spd(rng, d, floor=0.1):
    M = rng.standard_normal((d, d))
    return M @ M.T + floor * np.eye(d)


def random_bounded_qmi(rng, p, n, floor=0.1):
    return qmi.from_center_shape(spd(rng, p, 0.5), spd(rng, n, floor), rng.standard_normal((p, n)))


def random_stable(rng, nx, m=1, p=1, radius=None):
    A = rng.standard_normal((nx, nx))
    rho = np.max(np.abs(np.linalg.eigvals(A))) if nx else 1.0
    target = rng.uniform(0.1, 0.95) if radius is None else radius
    A = A * (target / rho) if rho > 0 else A
    return A, rng.standard_normal((nx, m)), rng.standard_normal((p, nx)), rng.standard_normal((p, m))


def tf_scalar(A, B, C, D, z):
    """Transfer function value of a SISO realization by a linear solve at each point."""
    A = np.atleast_2d(A)
    n = A.shape[0]
    return np.array([(np.atleast_2d(C) @ np.linalg.solve(zz * np.eye(n) - A, np.atleast_2d(B)) + D)[0, 0] for zz in z])


def dense_peak_gain(A, B, C, D, points=20001):
    """Largest singular value over a dense uniform grid of the unit circle."""
    A, B, C, D = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, C, D))
    n = A.shape[0]
    best = 0.0
    for w in np.linspace(0.0, np.pi, points):
        H = C @ np.linalg.solve(np.exp(1j * w) * np.eye(n) - A, B) + D
        best = max(best, np.linalg.norm(H, 2))
    return best


def _kernel(M, tol=1e-10):
    u, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T


def nominal_filter_margin(A, B, C_y, D_y, C_p, D_p, gamma):
    """Margin of the eliminated (projection-lemma) conditions for a full-order filter with gain < gamma.

    Independent of the synthesis module: it uses the filter-free pair of
    Lyapunov-type inequalities in ``R`` and ``S`` coupled by ``[[R, I], [I, S]] >= 0``.
    """
    from qmifilter import sdp

    n, m = B.shape
    pp = C_p.shape[0]
    prob = sdp.LmiProblem()
    R = prob.symmetric("R", n)
    S = prob.symmetric("S", n)
    t = prob.scalar("t")
    # output-side condition: the error channel is eliminated, leaving a Lyapunov bound on (A, B)
    L1 = sdp.bmat([[A @ R @ A.T - R, B], [B.T, -gamma * np.eye(m)]])
    prob.add_lmi(-L1 - t * np.eye(n + m))
    N = _kernel(np.hstack([C_y, D_y]))
    if N.shape[1]:
        L2 = sdp.bmat([
            [A.T @ S @ A - S, A.T @ S @ B, C_p.T],
            [B.T @ S @ A, B.T @ S @ B - gamma * np.eye(m), D_p.T],
            [C_p, D_p, -gamma * np.eye(pp)],
        ])
        T = np.block([[N, np.zeros((n + m, pp))], [np.zeros((pp, N.shape[1])), np.eye(pp)]])
        prob.add_lmi(-(T.T @ L2 @ T) - t * np.eye(T.shape[1]))
    prob.add_lmi(sdp.bmat([[R, np.eye(n)], [np.eye(n), S]]))
    prob.minimize(-t)
    sol = sdp.solve(prob)
    if sol.status is sdp.Status.INFEASIBLE:
        return -np.inf
    return sol.values["t"]


def nominal_filter_bound(A, B, C_y, D_y, C_p, D_p, hi=100.0, rel=1e-6):
    """Optimal H-infinity filtering level for a known plant, by bisection on the eliminated LMIs."""
    A, B, C_y, D_y, C_p, D_p = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, C_y, D_y, C_p, D_p))
    lo = 0.0
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if nominal_filter_margin(A, B, C_y, D_y, C_p, D_p, mid) > 1e-10:
            hi = mid
        else:
            lo = mid
    return hi
