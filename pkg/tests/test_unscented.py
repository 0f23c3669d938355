import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mutualloc.detection import stacked_detection_h
from mutualloc.unscented import UtParams, kalman_correct, measurement_stats, sigma_points

from conftest import random_spd, random_state


@pytest.mark.parametrize("n", [1, 2, 3, 8, 16])
def test_weights_sum_to_one(n):
    p = UtParams()
    wm, wc = p.weights(n)
    assert wm.sum() == pytest.approx(1.0)
    # the central covariance weight carries the extra 1 - alpha^2 + beta
    assert wc.sum() == pytest.approx(2.0 - p.alpha ** 2 + p.beta)


def test_kappa_validation():
    with pytest.raises(ValueError):
        UtParams(alpha=0.0)
    with pytest.raises(ValueError):
        UtParams(kappa=-5.0).lam(3)


def test_sigma_points_reproduce_moments(rng):
    x = rng.normal(size=6)
    P = random_spd(rng, 6)
    sp = sigma_points(x, P)
    np.testing.assert_allclose(sp.wm @ sp.points, x, atol=1e-12)
    d = sp.points - x
    np.testing.assert_allclose((d * sp.wc[:, None]).T @ d, P, atol=1e-10)


def test_sigma_points_zero_variance_rows(rng):
    P = random_spd(rng, 4)
    P[1, :] = P[:, 1] = 0.0
    sp = sigma_points(np.zeros(4), P)
    assert np.all(sp.points[:, 1] == 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6), st.integers(1, 4))
def test_linear_h_is_exact(seed, n, m):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    P = random_spd(rng, n)
    H = rng.normal(size=(m, n))
    c = rng.normal(size=m)
    R = random_spd(rng, m, 0.1)
    st_ = measurement_stats(x, P, lambda X: X @ H.T + c, R)
    np.testing.assert_allclose(st_.z_hat, H @ x + c, atol=1e-9)
    np.testing.assert_allclose(st_.P_zz, H @ P @ H.T + R, atol=1e-9)
    np.testing.assert_allclose(st_.P_zx, H @ P, atol=1e-9)


def test_kalman_correct_matches_closed_form(rng):
    n, m = 5, 3
    x = rng.normal(size=n)
    P = random_spd(rng, n)
    H = rng.normal(size=(m, n))
    R = random_spd(rng, m, 0.2)
    st_ = measurement_stats(x, P, lambda X: X @ H.T, R)
    nu = rng.normal(size=m)
    xk, Pk = kalman_correct(x, P, st_, nu)
    K = P @ H.T @ np.linalg.inv(H @ P @ H.T + R)
    np.testing.assert_allclose(xk, x + K @ nu, atol=1e-10)
    np.testing.assert_allclose(Pk, (np.eye(n) - K @ H) @ P, atol=1e-10)


def test_detection_stats_against_monte_carlo():
    """Unscented moments of the detection model agree with sampling for a
    mildly uncertain belief."""
    rng = np.random.default_rng(7)
    s = random_state(rng, 3, pos_sd=0.05, yaw_sd=0.02)
    h = lambda X: stacked_detection_h(X, 1, [0, 2])
    ut = measurement_stats(s.x, s.P, h, np.zeros((6, 6)))
    X = rng.multivariate_normal(s.x, s.P, size=200_000, method="eigh")
    Z = h(X)
    np.testing.assert_allclose(ut.z_hat, Z.mean(0), atol=3e-3)
    C = np.cov(Z.T)
    np.testing.assert_allclose(ut.P_zz, C, atol=0.05 * np.abs(C).max())


def test_angle_mask_circular_mean():
    x = np.array([np.pi - 0.01])
    P = np.array([[0.01]])
    st_ = measurement_stats(x, P, lambda X: np.angle(np.exp(1j * X)), np.zeros((1, 1)),
                            angle_mask=np.array([True]))
    assert abs(np.angle(np.exp(1j * (st_.z_hat[0] - x[0])))) < 1e-9
    assert st_.P_zz[0, 0] == pytest.approx(0.01, rel=1e-6)
