import numpy as np
import pytest
from hypothesis import given, strategies as st

from mutualloc.geom import (IDENTITY, Pose2z, compose_to_common, express_in, invert_pose,
                            rz_apply, rz_matrix, wrap_angle)

finite_angles = st.floats(-1e4, 1e4, allow_nan=False)


@pytest.mark.parametrize("a, expected", [
    (0.0, 0.0), (np.pi, np.pi), (-np.pi, np.pi), (3 * np.pi, np.pi),
    (2 * np.pi, 0.0), (-np.pi / 2, -np.pi / 2), (3 * np.pi / 2, -np.pi / 2),
])
def test_wrap_examples(a, expected):
    assert wrap_angle(a) == pytest.approx(expected, abs=1e-12)


def test_wrap_rejects_nonfinite():
    for bad in (np.nan, np.inf, [0.0, -np.inf]):
        with pytest.raises(ValueError):
            wrap_angle(bad)


@given(finite_angles)
def test_wrap_range_and_idempotence(a):
    w = wrap_angle(a)
    assert -np.pi < w <= np.pi
    assert wrap_angle(w) == w
    assert np.cos(w) == pytest.approx(np.cos(a), abs=1e-6)
    assert np.sin(w) == pytest.approx(np.sin(a), abs=1e-6)


def test_wrap_array_shape():
    a = np.linspace(-10, 10, 12).reshape(3, 4)
    assert wrap_angle(a).shape == (3, 4)


@given(finite_angles, st.lists(st.floats(-100, 100), min_size=3, max_size=3))
def test_rz_apply_matches_matrix_and_preserves_norm(psi, v):
    v = np.array(v)
    out = rz_apply(psi, v)
    np.testing.assert_allclose(out, rz_matrix(psi) @ v, atol=1e-9)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(v), rel=1e-12, abs=1e-12)
    assert out[2] == v[2]


def test_rz_apply_broadcasts(rng):
    psi = rng.uniform(-3, 3, (5, 2))
    v = rng.normal(size=(5, 2, 3))
    out = rz_apply(psi, v)
    for i in range(5):
        for j in range(2):
            np.testing.assert_allclose(out[i, j], rz_matrix(psi[i, j]) @ v[i, j])


def test_quarter_turn():
    np.testing.assert_allclose(rz_apply(np.pi / 2, [1.0, 0.0, 2.0]), [0.0, 1.0, 2.0], atol=1e-15)


poses = st.builds(lambda t, p: Pose2z(np.array(t), p),
                  st.lists(st.floats(-50, 50), min_size=3, max_size=3), finite_angles)


@given(poses)
def test_inverse_composes_to_identity(p):
    q = compose_to_common(p, invert_pose(p))
    np.testing.assert_allclose(q.t, IDENTITY.t, atol=1e-9)
    assert abs(wrap_angle(q.psi - IDENTITY.psi)) < 1e-9


@given(poses, poses)
def test_express_in_inverts_compose(f, local):
    back = express_in(f, compose_to_common(f, local))
    np.testing.assert_allclose(back.t, local.t, atol=1e-7)
    assert abs(wrap_angle(back.psi - local.psi)) < 1e-9


def test_pose_rejects_nan_and_wraps():
    with pytest.raises(ValueError):
        Pose2z([np.nan, 0, 0], 0.0)
    assert Pose2z([0, 0, 0], 3 * np.pi).psi == pytest.approx(np.pi)
