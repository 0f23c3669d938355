import numpy as np
import pytest

from mutualloc.state import (ProcessNoiseConfig, SystemState, initial_state, n_robots_of,
                             pin_reference, predict, stabilize_covariance, yaw_indices)


def test_state_shape_checks():
    with pytest.raises(ValueError):
        SystemState(np.zeros(9), np.eye(9))
    with pytest.raises(ValueError):
        SystemState(np.zeros(8), np.eye(7))
    assert n_robots_of(np.zeros(24)) == 3


def test_yaw_indices():
    np.testing.assert_array_equal(yaw_indices(2), [3, 7, 11, 15])


def test_predict_moves_mean_and_grows_covariance():
    s = initial_state(np.zeros((2, 4)))
    u = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, np.pi]])
    q = ProcessNoiseConfig()
    out = predict(s, u, 1.0, q)
    np.testing.assert_allclose(out.x[0:3], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(out.x[8:11], [0.0, 2.0, 0.0])
    assert out.x[11] == pytest.approx(np.pi)
    np.testing.assert_allclose(np.diag(out.P - s.P), q.diagonal(2))
    # reference frame offset never gains variance
    assert np.all(np.diag(out.P)[4:8] == 0)


def test_predict_zero_input_keeps_mean():
    s = initial_state(np.ones((3, 4)) * 0.5)
    out = predict(s, np.zeros((3, 4)), 0.1, ProcessNoiseConfig())
    np.testing.assert_array_equal(out.x, s.x)


def test_predict_wraps_yaw():
    s = initial_state(np.array([[0, 0, 0, 3.0], [0, 0, 0, 0.0]]))
    out = predict(s, np.array([[0, 0, 0, 1.0], [0, 0, 0, 0]]), 1.0, ProcessNoiseConfig())
    assert out.x[3] == pytest.approx(4.0 - 2 * np.pi)


def test_predict_validation():
    s = initial_state(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        predict(s, np.zeros((2, 4)), 0.0, ProcessNoiseConfig())
    with pytest.raises(ValueError):
        predict(s, np.zeros((3, 4)), 0.1, ProcessNoiseConfig())
    with pytest.raises(ValueError):
        ProcessNoiseConfig(sigma_v=-1)


def test_pin_reference():
    s = SystemState(np.arange(16.0), np.ones((16, 16)))
    pin_reference(s)
    assert np.all(s.x[4:8] == 0) and np.all(s.P[4:8] == 0) and np.all(s.P[:, 4:8] == 0)


def test_initial_state_correlates_yaws():
    local = np.array([[0, 0, 0, 0.1], [1, 2, 0, -0.3]])
    s = initial_state(local, 0.01, 0.002, None, 5.0, np.pi)
    b = 8
    # psi_global - psi_frame carries only the local yaw uncertainty
    var_local = s.P[b + 3, b + 3] + s.P[b + 7, b + 7] - 2 * s.P[b + 3, b + 7]
    assert var_local == pytest.approx(0.002 ** 2)
    assert s.x[b + 3] == pytest.approx(-0.3)
    assert np.all(np.linalg.eigvalsh(s.P) >= -1e-12)


def test_stabilize_passthrough_and_clamp(rng):
    A = rng.normal(size=(5, 5))
    P = A @ A.T
    out, m = stabilize_covariance(P)
    np.testing.assert_allclose(out, P)
    assert m == 0.0
    w, V = np.linalg.eigh(P)
    w[0] = -1e-12
    Pn = (V * w) @ V.T
    out, m = stabilize_covariance(Pn)
    assert m < 0
    assert np.linalg.eigvalsh(out)[0] >= -1e-15


def test_stabilize_rejects_real_defect():
    with pytest.raises(np.linalg.LinAlgError):
        stabilize_covariance(np.diag([1.0, -0.5]))
