"""Visual-inertial odometry measurement model and its unscented update."""
from dataclasses import dataclass

import numpy as np

from .geom import wrap_angle
from .state import (PSI, PSI_FRAME, ROBOT_DIM, SystemState, T_LOCAL,
                    pin_reference, robot_slice, stabilize_covariance, yaw_indices)
from .unscented import UtParams, kalman_correct, measurement_stats

ODOM_ANGLE_MASK = np.array([False, False, False, True])


@dataclass
class OdomMeasurement:
    """Pose of robot ``robot_id`` in its own odometry frame (0-based id)."""

    robot_id: int
    t_meas: np.ndarray
    psi_meas: float

    def __post_init__(self):
        self.t_meas = np.asarray(self.t_meas, dtype=float).reshape(3)
        self.psi_meas = wrap_angle(self.psi_meas)

    def as_array(self):
        return np.append(self.t_meas, self.psi_meas)


@dataclass(frozen=True)
class OdomNoise:
    sigma_t: float = 0.01
    sigma_psi: float = 0.002

    def __post_init__(self):
        if not (self.sigma_t > 0 and self.sigma_psi > 0):
            raise ValueError("odometry noise must be positive")

    def covariance(self):
        return np.diag([self.sigma_t ** 2] * 3 + [self.sigma_psi ** 2])


def odom_h(x, robot_id):
    """Odometry prediction ``[t_local, wrap(psi_global - psi_frame)]``.

    ``x`` may be a single state (8N,) or a batch (..., 8N).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // ROBOT_DIM
    if not 0 <= robot_id < n:
        raise IndexError("robot id %r out of range for %d robots" % (robot_id, n))
    r = x[..., robot_slice(robot_id)]
    out = np.empty(x.shape[:-1] + (4,))
    out[..., :3] = r[..., T_LOCAL]
    out[..., 3] = wrap_angle(r[..., PSI] - r[..., PSI_FRAME])
    return out


def _finish(x, P):
    x[yaw_indices(len(x) // ROBOT_DIM)] = wrap_angle(x[yaw_indices(len(x) // ROBOT_DIM)])
    state = pin_reference(SystemState(x, P))
    state.P, _ = stabilize_covariance(state.P)
    return state


def odom_update(state, z, noise=OdomNoise(), params=UtParams()):
    """Unscented Kalman update with one robot's odometry reading."""
    stats = measurement_stats(state.x, state.P, lambda pts: odom_h(pts, z.robot_id),
                              noise.covariance(), params, angle_mask=ODOM_ANGLE_MASK)
    nu = z.as_array() - stats.z_hat
    nu[3] = wrap_angle(nu[3])
    x, P = kalman_correct(state.x, state.P, stats, nu)
    return _finish(x, P)


def odom_update_all(state, zs, noise=OdomNoise(), params=UtParams()):
    """Fuse several robots' odometry readings in one stacked update."""
    if not zs:
        return state.copy()
    ids = [z.robot_id for z in zs]

    def h(pts):
        return np.concatenate([odom_h(pts, i) for i in ids], axis=-1)

    R = np.kron(np.eye(len(ids)), noise.covariance())
    mask = np.tile(ODOM_ANGLE_MASK, len(ids))
    stats = measurement_stats(state.x, state.P, h, R, params, angle_mask=mask)
    nu = np.concatenate([z.as_array() for z in zs]) - stats.z_hat
    nu[mask] = wrap_angle(nu[mask])
    x, P = kalman_correct(state.x, state.P, stats, nu)
    return _finish(x, P)
