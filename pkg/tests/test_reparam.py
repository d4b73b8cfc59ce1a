import numpy as np
import pytest

from helpers import spd
from qmifilter import matops, qmi, reparam
from qmifilter.errors import DimensionMismatch, NonPositiveEpsilon, NotPsd, RankDeficient
from qmifilter.reparam import Objective, QhatCache, RegressionSample, ReparamConfig


def scalar(v):
    return np.array([[float(v)]])


def test_rhat_gamma_examples():
    rhat, g2 = reparam.rhat_gamma_from_eps(np.eye(2), 0.1)
    assert np.allclose(rhat, 0.21 * np.eye(2))
    assert g2 == pytest.approx(1 / 0.21)
    assert g2 == pytest.approx(4.7619, abs=1e-4)
    assert np.allclose(np.eye(2) + rhat, 1.21 * np.eye(2))
    rhat, g2 = reparam.rhat_gamma_from_eps(scalar(2), 1.0)
    assert rhat[0, 0] == pytest.approx(6.0)
    assert g2 == pytest.approx(1 / 3)
    assert np.allclose(g2 * rhat, 2.0)


def test_rhat_gamma_errors():
    with pytest.raises(NonPositiveEpsilon):
        reparam.rhat_gamma_from_eps(np.eye(1), 0.0)
    with pytest.raises(NotPsd):
        reparam.rhat_gamma_from_eps(np.diag([1.0, 0.0]), 0.1)


def test_gamma_shrinks_with_epsilon():
    g = [reparam.rhat_gamma_from_eps(np.eye(1), e)[1] for e in (0.01, 0.1, 1.0, 10.0, 1e3)]
    assert all(a > b for a, b in zip(g, g[1:]))
    assert g[-1] < 1e-6


def test_solve_qhat_analytic():
    ball = qmi.ball_prior(scalar(0), 2.0)
    qhat, lams = reparam.solve_qhat([ball], np.eye(1), 3.0, scalar(0))
    assert qhat[0, 0] == pytest.approx(16.0, abs=1e-4)
    assert lams[0] == pytest.approx(4.0, abs=1e-4)


def test_solve_qhat_zero_q():
    ball = qmi.ball_prior(scalar(0), 2.0)
    qhat, lams = reparam.solve_qhat([ball], np.zeros((1, 1)), 3.0, scalar(0))
    assert abs(qhat[0, 0]) <= 1e-6
    assert abs(lams[0]) <= 1e-6


def test_solve_qhat_center_is_best():
    rng = np.random.default_rng(6)
    for _ in range(5):
        C = rng.standard_normal((2, 2))
        prior = qmi.from_center_shape(spd(rng, 2, 1.0), spd(rng, 2, 0.1), C)
        at_center, _ = reparam.solve_qhat([prior], np.eye(2), 2.0, C)
        far, _ = reparam.solve_qhat([prior], np.eye(2), 2.0, C + 5.0)
        assert np.trace(at_center) <= np.trace(far) + 1e-6


def test_solve_qhat_margin_and_logdet():
    rng = np.random.default_rng(7)
    for _ in range(10):
        p, n = 2, 3
        priors = [qmi.from_center_shape(spd(rng, p, 1.0), spd(rng, n), rng.standard_normal((p, n))) for _ in range(2)]
        Q = spd(rng, p)
        tb = reparam.default_theta_bar(priors, p, n)
        for obj in Objective:
            qhat, lams = reparam.solve_qhat(priors, Q, 3.0, tb, obj)
            assert reparam.qhat_margin(priors, Q, 3.0, tb, qhat, lams) >= -1e-7
            assert all(v >= 0 for v in lams)
        tr, _ = reparam.solve_qhat(priors, Q, 3.0, tb, Objective.TRACE)
        ld, _ = reparam.solve_qhat(priors, Q, 3.0, tb, Objective.LOGDET)
        delta = 1e-6 * max(1.0, np.trace(tr) / n)
        logdet = lambda M: np.linalg.slogdet(M + delta * np.eye(n))[1]
        assert logdet(ld) <= logdet(tr) + 1e-3


def test_solve_qhat_rejects_mismatched_priors():
    with pytest.raises(DimensionMismatch):
        reparam.solve_qhat([], np.eye(1), 1.0, scalar(0))
    with pytest.raises(DimensionMismatch):
        reparam.solve_qhat([qmi.ball_prior(np.zeros((1, 2)), 1.0)], np.eye(1), 1.0, scalar(0))


def test_reparameterize_square_regressor_ignores_qhat():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((2, 2))
    s = RegressionSample(X, rng.standard_normal((1, 2)), np.eye(1), 0.1 * np.eye(2))
    rhat, _ = reparam.rhat_gamma_from_eps(s.R, 0.1)
    a = reparam.reparameterize_sample(s, np.zeros((2, 2)), rhat, np.zeros((1, 2)))
    b = reparam.reparameterize_sample(s, 100 * np.eye(2), rhat, np.ones((1, 2)))
    assert np.allclose(a.pi, b.pi)
    # every theta consistent with the sample lies strictly inside
    for _ in range(200):
        W = rng.standard_normal((1, 2))
        W *= rng.uniform() * np.sqrt(0.1) / np.linalg.norm(W)
        th = (s.Y - W) @ np.linalg.inv(X)
        assert qmi.contains(a, th, 0.0)


def test_reparameterize_scalar_chain():
    alpha = 0.1
    s = RegressionSample(scalar(1), scalar(1), scalar(1), scalar(alpha**2))
    rhat, _ = reparam.rhat_gamma_from_eps(s.R, 0.1)
    q = reparam.reparameterize_sample(s, scalar(0), rhat, scalar(42))
    expected = qmi.from_center_shape(scalar(1), scalar((1.1 * alpha) ** 2), scalar(1))
    assert np.allclose(q.pi, expected.pi)
    r = 1.1 * alpha
    assert qmi.contains(q, scalar(1 + r * 0.999), 0.0)
    assert not qmi.contains(q, scalar(1 + r * 1.001), 0.0)


def test_reparameterize_rank_deficient():
    s = RegressionSample(np.zeros((2, 1)), np.ones((1, 1)), np.eye(1), np.eye(1))
    with pytest.raises(RankDeficient):
        reparam.reparameterize_sample(s, np.eye(2), np.eye(1), np.zeros((1, 2)))


def _random_instance(rng):
    p, n = int(rng.integers(1, 3)), int(rng.integers(2, 4))
    m = int(rng.integers(1, n))
    theta = rng.standard_normal((p, n))
    X = rng.standard_normal((n, m))
    Q, R = spd(rng, p, 0.5), spd(rng, m, 0.2)
    W = rng.standard_normal((p, m))
    # scale W so that R - W^T Q W >= 0
    lim = np.sqrt(matops.min_eig(R) / matops.max_eig(Q))
    W *= rng.uniform(0, 1) * lim / max(np.linalg.norm(W, 2), 1e-12)
    prior = qmi.ball_prior(theta + 0.2 * rng.standard_normal((p, n)), 1.0 + rng.uniform())
    return theta, RegressionSample(X, theta @ X + W, Q, R), prior


def test_true_parameter_always_contained():
    rng = np.random.default_rng(9)
    cache = QhatCache()
    for _ in range(200):
        theta, s, prior = _random_instance(rng)
        if not qmi.contains(prior, theta, 0.0):
            continue
        res = reparam.reparameterize(s, [prior], ReparamConfig(0.1), cache)
        assert qmi.contains(res.sigma_hat, theta, 1e-7)
        assert matops.is_pd(res.rhat)


def test_over_coverage_shrinks_with_epsilon():
    rng = np.random.default_rng(10)
    theta = np.array([[0.5, -0.2]])
    X = np.array([[1.0], [0.5]])
    s = RegressionSample(X, theta @ X + 0.05, np.eye(1), scalar(0.01))
    prior = qmi.ball_prior(theta, 1.0)
    box = theta + rng.uniform(-1.0, 1.0, size=(20000, 1, 2))
    in_data = np.array([0.01 - float(((s.Y - t @ X) ** 2)[0, 0]) >= 0 for t in box])
    in_prior = qmi.contains_many(prior, box, 0.0)
    fractions = []
    for eps in (1.0, 0.5, 0.1, 0.01):
        hat = reparam.reparameterize(s, [prior], ReparamConfig(eps)).sigma_hat
        inside = qmi.contains_many(hat, box, 0.0)
        assert not np.any(in_data & in_prior & ~inside)
        fractions.append(float(np.mean(inside & ~in_data)))
    assert all(a >= b for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] < fractions[0]


def test_qhat_cache_reuses_solution():
    prior = qmi.ball_prior(np.zeros((1, 2)), 1.0)
    cache = QhatCache()
    s1 = RegressionSample(np.array([[1.0], [0.0]]), scalar(0.1), np.eye(1), scalar(0.01))
    s2 = RegressionSample(np.array([[0.0], [1.0]]), scalar(0.2), np.eye(1), scalar(0.01))
    r1 = reparam.reparameterize(s1, [prior], ReparamConfig(0.1), cache)
    r2 = reparam.reparameterize(s2, [prior], ReparamConfig(0.1), cache)
    assert len(cache) == 1
    assert np.array_equal(r1.qhat, r2.qhat)


def test_default_theta_bar():
    unb = qmi.Qmi(1, 1, np.diag([0.0, 1.0]))
    assert reparam.default_theta_bar([unb], 1, 1)[0, 0] == 0.0
    assert reparam.default_theta_bar([unb, qmi.ball_prior(scalar(3), 1.0)], 1, 1)[0, 0] == pytest.approx(3.0)


def test_structural_entry_within_tolerance():
    prior = qmi.ball_prior(scalar(0.75), 0.2)
    q = reparam.structural_constraint_qmi(scalar(1), scalar(1), scalar(-0.8), 0.008, [prior])
    assert qmi.contains(q, scalar(0.80), 0.0)
    assert qmi.contains(q, scalar(0.8 + 0.0087), 0.0)
    assert not qmi.contains(q, scalar(0.81), 0.0)
    assert not qmi.contains(q, scalar(0.79), 0.0)


def test_structural_selector_only_constrains_entry():
    rng = np.random.default_rng(11)
    prior = qmi.ball_prior(np.zeros((2, 2)), 2.0)
    E, F = reparam.entry_selector((2, 2), 1, 0)
    q = reparam.structural_constraint_qmi(E, F, scalar(0.0), 0.01, [prior])
    for _ in range(200):
        th = rng.uniform(-1.0, 1.0, size=(2, 2))
        th[1, 0] = rng.uniform(-0.0099, 0.0099)
        assert qmi.contains(q, th, 1e-9)
        th[1, 0] = 0.0111 * rng.choice([-1.0, 1.0])
        assert not qmi.contains(q, th, 0.0)


def test_structural_sample_errors():
    with pytest.raises(RankDeficient):
        reparam.structural_sample(np.zeros((1, 2)), np.eye(2), np.zeros((1, 2)), 0.1)
    with pytest.raises(RankDeficient):
        reparam.structural_sample(np.eye(1), np.zeros((2, 1)), np.zeros((1, 1)), 0.1)
    with pytest.raises(NonPositiveEpsilon):
        reparam.structural_sample(np.eye(1), np.eye(1), np.zeros((1, 1)), 0.0)


def test_regression_sample_validation():
    with pytest.raises(DimensionMismatch):
        RegressionSample(np.eye(2), np.ones((1, 3)), np.eye(1), np.eye(2))
    with pytest.raises(NotPsd):
        RegressionSample(np.eye(1), np.eye(1), -np.eye(1), np.eye(1))
