import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from helpers import dense_peak_gain, random_bounded_qmi, random_stable
from qmifilter import analysis, qmi
from qmifilter.analysis import Estimator, StateSpace
from qmifilter.errors import DimensionMismatch, Unbounded, Unstable


def test_spectral_radius_examples():
    assert analysis.spectral_radius(0.7 * np.eye(3)) == pytest.approx(0.7, abs=1e-10)
    assert analysis.spectral_radius([[0.7, 0.0], [0.3, 0.7]]) == pytest.approx(0.7, abs=1e-10)
    assert analysis.spectral_radius([[0.0, 1.0], [-0.25, 0.0]]) == pytest.approx(0.5, abs=1e-10)


def test_hinf_examples():
    assert analysis.hinf_norm(StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]])) == pytest.approx(2.0, abs=1e-4)
    assert analysis.hinf_norm(StateSpace([[0.0]], [[1.0]], [[1.0]], [[0.0]])) == pytest.approx(1.0, abs=1e-4)
    assert analysis.hinf_norm(StateSpace([[0.0]], [[0.0]], [[0.0]], [[0.3]])) == pytest.approx(0.3, abs=1e-4)


@pytest.mark.parametrize("method", ["grid", "lmi", "both"])
def test_hinf_methods_agree_on_analytic_value(method):
    sys = StateSpace([[-0.5]], [[1.0]], [[1.0]], [[0.0]])  # peak at w = pi
    assert analysis.hinf_norm(sys, method=method) == pytest.approx(2.0, rel=1e-5)


def test_hinf_unknown_method():
    with pytest.raises(ValueError):
        analysis.hinf_norm(StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]]), method="hamiltonian")


def test_hinf_unstable():
    with pytest.raises(Unstable):
        analysis.hinf_norm(StateSpace([[1.01]], [[1.0]], [[1.0]], [[0.0]]))


def test_hinf_lightly_damped_resonance():
    r, w0 = 0.995, 1.1
    A = r * np.array([[np.cos(w0), -np.sin(w0)], [np.sin(w0), np.cos(w0)]])
    B, C, D = np.array([[1.0], [0.0]]), np.array([[0.0, 1.0]]), np.zeros((1, 1))
    sys = StateSpace(A, B, C, D)
    res = minimize_scalar(lambda w: -abs((C @ np.linalg.solve(np.exp(1j * w) * np.eye(2) - A, B))[0, 0]),
                          bounds=(w0 - 0.05, w0 + 0.05), method="bounded", options={"xatol": 1e-12})
    assert analysis.hinf_norm(sys) == pytest.approx(-res.fun, rel=1e-5)


def test_hinf_lmi_vs_grid_random():
    rng = np.random.default_rng(21)
    for _ in range(20):
        nx, m, p = int(rng.integers(1, 5)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
        sys = StateSpace(*random_stable(rng, nx, m, p))
        grid = analysis.hinf_norm(sys, method="grid")
        lmi = analysis.hinf_norm(sys, method="lmi")
        assert abs(lmi - grid) <= 1e-3 * grid
        assert analysis.hinf_norm(sys) >= dense_peak_gain(sys.A, sys.B, sys.C, sys.D, 2001) * (1 - 1e-9)


@given(st.integers(0, 2**32 - 1))
def test_hinf_lower_bounds(seed):
    rng = np.random.default_rng(seed)
    sys = StateSpace(*random_stable(rng, int(rng.integers(1, 4)), 2, 2))
    g = analysis.hinf_norm(sys, method="grid")
    assert g >= np.linalg.norm(sys.D, 2) - 1e-9
    assert g >= np.linalg.norm(analysis.dc_gain(sys), 2) - 1e-9


@given(st.integers(0, 2**32 - 1))
def test_hinf_submultiplicative(seed):
    rng = np.random.default_rng(seed)
    g1 = StateSpace(*random_stable(rng, 2, 1, 2))
    g2 = StateSpace(*random_stable(rng, 2, 2, 1))
    both = analysis.hinf_norm(analysis.series(g1, g2), method="grid")
    assert both <= analysis.hinf_norm(g1, method="grid") * analysis.hinf_norm(g2, method="grid") + 1e-6


def test_series_composes_transfer_functions():
    rng = np.random.default_rng(22)
    g1 = StateSpace(*random_stable(rng, 2, 1, 1))
    g2 = StateSpace(*random_stable(rng, 3, 1, 1))
    w = np.linspace(0, np.pi, 7)
    H = analysis.freq_response(analysis.series(g1, g2), w)
    assert np.allclose(H, analysis.freq_response(g2, w) @ analysis.freq_response(g1, w))


def test_state_space_dimension_check():
    with pytest.raises(DimensionMismatch):
        StateSpace(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), np.zeros((1, 1)))
    with pytest.raises(DimensionMismatch):
        Estimator(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), np.zeros((2, 1)))


def test_error_system_pass_through_is_zero():
    A, B_p, C_y, D_yp = np.array([[0.8]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[0.1]])
    est = Estimator(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1))
    err = analysis.closed_loop_error_system(A, B_p, C_y, D_yp, C_y, D_yp, est)
    assert analysis.hinf_norm(err) <= 1e-12


def test_error_system_zero_estimator_is_plant_channel():
    rng = np.random.default_rng(23)
    A, B_p, C_p, D_p = random_stable(rng, 2, 2, 1)
    C_y, D_yp = rng.standard_normal((1, 2)), rng.standard_normal((1, 2))
    est = Estimator(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    err = analysis.closed_loop_error_system(A, B_p, C_y, D_yp, C_p, D_p, est)
    w = np.linspace(0, np.pi, 9)
    assert np.allclose(analysis.freq_response(err, w), analysis.freq_response(StateSpace(A, B_p, C_p, D_p), w))
    assert analysis.hinf_norm(err) == pytest.approx(analysis.hinf_norm(StateSpace(A, B_p, C_p, D_p)), rel=1e-6)


def test_error_system_matches_transfer_function_oracle():
    a, b, c, d, cp, dp = 0.8, 1.0, 1.0, 0.1, 1.0, 0.0
    ae, be, ce, de = 0.3, 0.5, 0.9, 0.2
    est = Estimator([[ae]], [[be]], [[ce]], [[de]])
    err = analysis.closed_loop_error_system([[a]], [[b]], [[c]], [[d]], [[cp]], [[dp]], est)

    def oracle(w):
        z = np.exp(1j * w)
        tz = cp * b / (z - a) + dp
        ty = c * b / (z - a) + d
        return tz - (ce * be / (z - ae) + de) * ty

    w = np.linspace(0, np.pi, 1001)
    assert np.max(np.abs(analysis.freq_response(err, w)[:, 0, 0] - oracle(w))) <= 1e-8
    peak = minimize_scalar(lambda v: -abs(oracle(v)), bounds=(0, np.pi), method="bounded", options={"xatol": 1e-12})
    exact = max(-peak.fun, abs(oracle(0.0)), abs(oracle(np.pi)))
    assert analysis.hinf_norm(err) == pytest.approx(exact, rel=1e-6)


def test_error_system_dimension_mismatch():
    est = Estimator(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    with pytest.raises(DimensionMismatch):
        analysis.closed_loop_error_system([[0.5]], [[1.0]], [[1.0]], [[0.0]], [[1.0]], [[0.0]], est)


def test_sample_members_unit_ball():
    ball = qmi.ball_prior(np.zeros((1, 1)), 1.0)
    pts = analysis.sample_members(ball, 100, seed=0)
    vals = np.array([p[0, 0] for p in pts])
    assert len(pts) == 100
    assert np.all(np.abs(vals) <= 1.0 + 1e-12)
    assert np.any(np.abs(vals) >= 0.99)
    assert np.sum(np.abs(vals) >= 0.99) >= 10
    assert vals[0] == 0.0


def test_sample_members_degenerate_radius():
    C = np.array([[0.4, -0.2]])
    q = qmi.from_center_shape(np.eye(1), np.zeros((2, 2)), C)
    for p in analysis.sample_members(q, 20, seed=1):
        assert np.allclose(p, C, atol=1e-12)


def test_sample_members_random_sets():
    rng = np.random.default_rng(24)
    for seed in range(30):
        p, n = (int(v) for v in rng.integers(1, 4, size=2))
        q = random_bounded_qmi(rng, p, n)
        pts = analysis.sample_members(q, 40, seed=seed)
        assert all(qmi.contains(q, t, 1e-9) for t in pts)
        again = analysis.sample_members(q, 40, seed=seed)
        assert all(np.array_equal(a, b) for a, b in zip(pts, again))


def test_sample_members_unbounded():
    with pytest.raises(Unbounded):
        analysis.sample_members(qmi.Qmi(1, 1, np.diag([0.0, 1.0])), 5)


def test_split_delta():
    D = np.arange(12.0).reshape(3, 4)
    A, B, C, Dy = analysis.split_delta(D, 2, 2)
    assert np.array_equal(np.block([[A, B], [C, Dy]]), D)
