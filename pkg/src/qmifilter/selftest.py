"""Quick randomized property checks runnable without pytest (``qmifilter selftest``)."""

from __future__ import annotations

import time

import numpy as np

from . import analysis, matops, prior, qmi, reparam, synth


def _random_bounded_qmi(rng, p, n, scale=1.0):
    K = rng.standard_normal((p, p))
    K = K @ K.T + 0.5 * np.eye(p)
    S = rng.standard_normal((n, n))
    S = scale * (S @ S.T + 0.1 * np.eye(n))
    return qmi.from_center_shape(K, S, rng.standard_normal((p, n)))


def check_dualization(rng, trials=200) -> tuple[bool, str]:
    worst, disagree = 0.0, 0
    for _ in range(trials):
        p, n = rng.integers(1, 4, size=2)
        q = _random_bounded_qmi(rng, p, n)
        d = qmi.dualize(q)
        worst = max(worst, float(np.max(np.abs(qmi.dualize(d).pi - q.pi))) / max(1.0, np.max(np.abs(q.pi))))
        center = qmi.bounded_center(q)
        for _ in range(20):
            th = center + rng.standard_normal((p, n)) * rng.uniform(0, 2)
            a = matops.min_eig(qmi.evaluate(q, th))
            b = matops.min_eig(qmi.evaluate(d, th.T))
            if abs(a) > 1e-6 and abs(b) > 1e-6 and (a > 0) != (b > 0):
                disagree += 1
    return disagree == 0 and worst <= 1e-10, f"disagreements {disagree}, involution error {worst:.1e}"


def check_reparameterization(rng, instances=20, probes=2000) -> tuple[bool, str]:
    viol_i = viol_ii = 0
    for _ in range(instances):
        p, n = int(rng.integers(1, 3)), int(rng.integers(2, 4))
        m = int(rng.integers(1, n))
        X = rng.standard_normal((n, m))
        theta = rng.standard_normal((p, n))
        Q = np.eye(p)
        R = 0.2 * np.eye(m)
        Y = theta @ X + 0.1 * rng.standard_normal((p, m))
        sample = reparam.RegressionSample(X, Y, Q, R)
        pri = qmi.ball_prior(theta + 0.1 * rng.standard_normal((p, n)), 1.5)
        res = reparam.reparameterize(sample, [pri], reparam.ReparamConfig(epsilon=0.1))
        cand = qmi.bounded_center(pri) + 2.0 * rng.uniform(-1, 1, size=(probes, p, n))
        in_data = np.array([matops.min_eig(R - (Y - t @ X).T @ Q @ (Y - t @ X)) >= 0 for t in cand])
        in_prior = qmi.contains_many(pri, cand, 0.0)
        in_hat = qmi.contains_many(res.sigma_hat, cand, 1e-7)
        viol_i += int(np.sum(in_data & in_prior & ~in_hat))
        W = Y[None] - cand @ X
        inflated = np.array([matops.min_eig((R + res.rhat) - w.T @ Q @ w) for w in W])
        viol_ii += int(np.sum((inflated < -1e-6) & in_prior & qmi.contains_many(res.sigma_hat, cand, 0.0)))
    return viol_i == 0 and viol_ii == 0, f"containment violations {viol_i}, exclusion violations {viol_ii}"


def check_qhat_analytic() -> tuple[bool, str]:
    pri = qmi.ball_prior(np.zeros((1, 1)), 2.0)
    qhat, lams = reparam.solve_qhat([pri], np.eye(1), 3.0, np.zeros((1, 1)))
    ok = abs(qhat[0, 0] - 16.0) <= 1e-4 and abs(lams[0] - 4.0) <= 1e-4
    return ok, f"Q_hat {qhat[0, 0]:.6f}, lambda {lams[0]:.6f}"


def check_stacking(rng, draws=2000) -> tuple[bool, str]:
    worst = np.inf
    for _ in range(draws):
        p, m, N = int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.integers(1, 6))
        D = rng.standard_normal((p, m * N))
        for k in range(N):
            blk = D[:, k * m:(k + 1) * m]
            D[:, k * m:(k + 1) * m] = blk / max(1.0, np.linalg.norm(blk, 2)) * rng.uniform()
        worst = min(worst, prior.stacked_bound_margin(D, np.eye(p), np.eye(m), N))
    return worst >= -1e-9, f"worst margin {worst:.2e}"


def check_hinf() -> tuple[bool, str]:
    g = analysis.hinf_norm(analysis.StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]]))
    return abs(g - 2.0) <= 1e-4, f"norm {g:.8f}"


def check_synthesis() -> tuple[bool, str]:
    ab = qmi.ball_prior(np.array([[0.8, 1.0]]), 0.05)
    cd = qmi.ball_prior(np.array([[1.0, 0.1]]), 0.05)
    plant = synth.UncertainPlant(np.eye(1), np.zeros((1, 1)), ab, cd)
    res = synth.synthesize(plant)
    ver = synth.verify_robust_bound(plant, res.estimator, res.gamma)
    val = synth.validate_by_sampling(plant, res, 50, 0)
    return ver.certified and val.passed, f"gamma {res.gamma:.6f}, max sampled ratio {val.max_ratio:.4f}"


def run(seed: int = 0, out=print) -> bool:
    rng = np.random.default_rng(seed)
    checks = [
        ("dualization", lambda: check_dualization(rng)),
        ("reparameterization", lambda: check_reparameterization(rng)),
        ("qhat_analytic", check_qhat_analytic),
        ("stacking", lambda: check_stacking(rng)),
        ("hinf_analytic", check_hinf),
        ("synthesis", check_synthesis),
    ]
    all_ok = True
    for name, fn in checks:
        t0 = time.perf_counter()
        ok, detail = fn()
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({time.perf_counter() - t0:.1f}s)")
    return all_ok
