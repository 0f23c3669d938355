import numpy as np
import pytest

from mutualloc.odometry import OdomMeasurement, OdomNoise, odom_h, odom_update, odom_update_all
from mutualloc.state import ROBOT_DIM

from conftest import random_state


def odom_matrix(n_robots, i):
    H = np.zeros((4, ROBOT_DIM * n_robots))
    b = ROBOT_DIM * i
    H[:3, b:b + 3] = np.eye(3)
    H[3, b + 3] = 1.0
    H[3, b + 7] = -1.0
    return H


def closed_form(s, H, z, R):
    nu = z - H @ s.x
    nu[3::4] = np.angle(np.exp(1j * nu[3::4]))
    S = H @ s.P @ H.T + R
    K = s.P @ H.T @ np.linalg.inv(S)
    return s.x + K @ nu, s.P - K @ S @ K.T


def test_odom_h_values(rng):
    s = random_state(rng, 3)
    z = odom_h(s.x, 1)
    r = s.x[8:16]
    np.testing.assert_allclose(z[:3], r[:3])
    assert z[3] == pytest.approx(np.angle(np.exp(1j * (r[3] - r[7]))))
    with pytest.raises(IndexError):
        odom_h(s.x, 3)


def test_single_update_matches_closed_form(rng):
    s = random_state(rng, 3)
    noise = OdomNoise()
    z = OdomMeasurement(2, s.x[16:19] + 0.01, s.x[19] - s.x[23] + 0.003)
    out = odom_update(s, z, noise)
    x_cf, P_cf = closed_form(s, odom_matrix(3, 2), z.as_array(), noise.covariance())
    np.testing.assert_allclose(out.x, x_cf, atol=1e-9)
    np.testing.assert_allclose(out.P, P_cf, atol=1e-9)


def test_stacked_update_matches_closed_form(rng):
    s = random_state(rng, 3)
    noise = OdomNoise(0.02, 0.004)
    zs = [OdomMeasurement(i, s.x[8 * i:8 * i + 3] + rng.normal(0, 0.02, 3),
                          s.x[8 * i + 3] - s.x[8 * i + 7] + rng.normal(0, 0.004))
          for i in range(3)]
    out = odom_update_all(s, zs, noise)
    H = np.vstack([odom_matrix(3, i) for i in range(3)])
    R = np.kron(np.eye(3), noise.covariance())
    x_cf, P_cf = closed_form(s, H, np.concatenate([z.as_array() for z in zs]), R)
    np.testing.assert_allclose(out.x, x_cf, atol=1e-9)
    np.testing.assert_allclose(out.P, P_cf, atol=1e-9)


def test_update_pins_reference_and_shrinks(rng):
    s = random_state(rng, 2)
    out = odom_update_all(s, [OdomMeasurement(i, np.zeros(3), 0.0) for i in range(2)])
    assert np.all(out.x[4:8] == 0)
    assert np.trace(out.P) < np.trace(s.P)
    assert odom_update_all(s, []).x is not s.x


def test_noise_validation():
    with pytest.raises(ValueError):
        OdomNoise(0.0, 0.1)
