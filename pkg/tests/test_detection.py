import numpy as np
import pytest

from mutualloc.detection import (BearingDistance, SIGMA_BEARING, bearing_distance_to_cartesian,
                                 detection_h, sigma_distance, stacked_detection_h, tangent_basis)
from mutualloc.state import initial_state

from conftest import random_state


def state_from_poses(frames, local):
    s = initial_state(np.asarray(local, float), frame_mean=np.asarray(frames, float))
    return s.x


def test_sigma_distance_values():
    np.testing.assert_allclose(sigma_distance([1.0, 3.0, 6.0]),
                               [0.0831, 0.1821, 0.3306], rtol=1e-12)
    assert SIGMA_BEARING == 0.008


def test_detection_of_robot_ahead():
    # observer 0 at the origin facing +y; target 1 at (0, 2, 0) in f1
    x = state_from_poses([[0, 0, 0, 0], [0, 2, 0, 0]], [[0, 0, 0, np.pi / 2], [0, 0, 0, 0]])
    np.testing.assert_allclose(detection_h(x, 0, 1), [2.0, 0.0, 0.0], atol=1e-12)


def test_detection_through_frame_offset():
    # target 1 sits at local (1,0,0) in a frame rotated by pi/2 and shifted by (3,0,1)
    x = state_from_poses([[0, 0, 0, 0], [3, 0, 1, np.pi / 2]], [[0, 0, 0, 0], [1, 0, 0, 0]])
    np.testing.assert_allclose(detection_h(x, 0, 1), [3.0, 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(detection_h(x, 1, 0), [-1.0, 3.0, -1.0], atol=1e-12)


def test_stacked_and_batched_agree(rng):
    s = random_state(rng, 4)
    z = stacked_detection_h(s.x, 2, [0, 1, 3])
    for k, t in enumerate([0, 1, 3]):
        np.testing.assert_allclose(z[3 * k:3 * k + 3], detection_h(s.x, 2, t))
    X = np.stack([s.x, s.x + 0.1])
    Zb = stacked_detection_h(X, 2, [0, 1, 3])
    np.testing.assert_allclose(Zb[0], z)
    np.testing.assert_allclose(Zb[1], stacked_detection_h(s.x + 0.1, 2, [0, 1, 3]))


def test_detection_rejects_self_and_out_of_range(rng):
    s = random_state(rng, 2)
    with pytest.raises(ValueError):
        detection_h(s.x, 1, 1)
    with pytest.raises(IndexError):
        detection_h(s.x, 0, 5)


def test_tangent_basis_orthonormal(rng):
    for _ in range(20):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        e1, e2 = tangent_basis(u)
        B = np.stack([u, e1, e2])
        np.testing.assert_allclose(B @ B.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(np.stack([e1, e2, u])) == pytest.approx(1.0)


def test_bearing_distance_covariance_structure():
    u = np.array([0.6, 0.0, 0.8])
    p, R = bearing_distance_to_cartesian(BearingDistance(u, 5.0))
    np.testing.assert_allclose(p, 5.0 * u)
    w, V = np.linalg.eigh(R)
    np.testing.assert_allclose(sorted(w), sorted([(5 * 0.008) ** 2] * 2
                                                 + [float(sigma_distance(5.0)) ** 2]), rtol=1e-10)
    assert u @ R @ u == pytest.approx(float(sigma_distance(5.0)) ** 2)


def test_bearing_distance_validation():
    with pytest.raises(ValueError):
        BearingDistance([1.0, 1.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        bearing_distance_to_cartesian(BearingDistance([1.0, 0, 0], 0.0))
