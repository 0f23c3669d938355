import numpy as np
import pytest
from hypothesis import given, strategies as st

from mutualloc.metrics import absolute_error, convergence_error, relative_error, relative_poses


def poses(rng, n=4):
    return np.column_stack([rng.normal(size=(n, 3)), rng.uniform(-np.pi, np.pi, n)])


def rigid(p, t, psi):
    c, s = np.cos(psi), np.sin(psi)
    out = p.copy()
    out[:, 0] = c * p[:, 0] - s * p[:, 1] + t[0]
    out[:, 1] = s * p[:, 0] + c * p[:, 1] + t[1]
    out[:, 2] = p[:, 2] + t[2]
    out[:, 3] = p[:, 3] + psi
    return out


def test_absolute_examples(rng):
    p = poses(rng)
    assert absolute_error(p, p) == 0.0
    q = p.copy()
    q[2, 0] += 1.0
    assert absolute_error(q, p) == pytest.approx(1.0)
    a = np.zeros((1, 4))
    b = np.zeros((1, 4))
    a[0, 3], b[0, 3] = np.pi, -np.pi
    assert absolute_error(a, b) == pytest.approx(0.0, abs=1e-20)
    assert absolute_error(q, p, per_channel=True) == pytest.approx((1.0, 0.0))


def test_relative_lateral_offset():
    truth = np.zeros((2, 4))
    truth[1, 0] = 2.0
    est = truth.copy()
    est[1, 1] = 0.5
    assert relative_error(est, truth) == pytest.approx(0.25)


def test_count_mismatch():
    with pytest.raises(ValueError):
        absolute_error(np.zeros((2, 4)), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        relative_error(np.zeros((2, 3)), np.zeros((2, 3)))


@given(st.integers(0, 2 ** 31 - 1), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10),
       st.floats(-np.pi, np.pi))
def test_relative_error_gauge_invariant(seed, tx, ty, tz, psi):
    rng = np.random.default_rng(seed)
    truth = poses(rng)
    est = truth + rng.normal(0, 0.1, truth.shape)
    base = relative_error(est, truth)
    assert relative_error(rigid(est, (tx, ty, tz), psi), truth) == pytest.approx(base, abs=1e-9)
    assert relative_error(rigid(truth, (tx, ty, tz), psi), truth) == pytest.approx(0, abs=1e-9)
    assert convergence_error(rigid(est, (tx, ty, tz), psi), truth) == pytest.approx(base,
                                                                                    abs=1e-9)


def test_relative_poses_reference_at_origin(rng):
    r = relative_poses(poses(rng))
    np.testing.assert_allclose(r[0], 0.0, atol=1e-12)


@given(st.integers(0, 2 ** 31 - 1))
def test_absolute_nonnegative(seed):
    rng = np.random.default_rng(seed)
    assert absolute_error(poses(rng), poses(rng)) >= 0
