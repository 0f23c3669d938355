"""Pose error functionals.

Poses are (N, 4) arrays ``[x, y, z, yaw]``. Position errors are in m^2 and
yaw errors in rad^2; the combined value is their plain sum.
"""
import numpy as np

from .geom import rz_apply, wrap_angle


def _check(est, truth):
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape or est.ndim != 2 or est.shape[1] != 4:
        raise ValueError("pose arrays must both be (N, 4); got %s and %s"
                         % (est.shape, truth.shape))
    return est, truth


def _split(est, truth):
    pos = float(np.sum((est[:, :3] - truth[:, :3]) ** 2))
    yaw = float(np.sum(wrap_angle(est[:, 3] - truth[:, 3]) ** 2))
    return pos, yaw


def absolute_error(est, truth, per_channel=False):
    """Squared pose error in the common frame.

    With ``per_channel=True`` returns ``(position_m2, yaw_rad2)``.
    """
    pos, yaw = _split(*_check(est, truth))
    return (pos, yaw) if per_channel else pos + yaw


def relative_poses(poses):
    """Every pose expressed in robot 0's body (yaw) frame."""
    poses = np.asarray(poses, dtype=float)
    out = np.empty_like(poses)
    out[:, :3] = rz_apply(-poses[0, 3], poses[:, :3] - poses[0, :3])
    out[:, 3] = wrap_angle(poses[:, 3] - poses[0, 3])
    return out


def relative_error(est, truth, per_channel=False):
    """Squared error between the relative configurations of ``est`` and
    ``truth``; unchanged by any rigid motion applied to all of ``est``."""
    est, truth = _check(est, truth)
    pos, yaw = _split(relative_poses(est), relative_poses(truth))
    return (pos, yaw) if per_channel else pos + yaw


def convergence_error(est, truth_final, per_channel=False):
    """Relative error of the current estimate against the final true
    configuration."""
    return relative_error(est, truth_final, per_channel)
