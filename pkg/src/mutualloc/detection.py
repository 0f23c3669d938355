"""Anonymous robot-to-robot detection model.

A detection is the position of some other robot expressed in the observer's
yaw-aligned body frame. It carries no identity.
"""
from dataclasses import dataclass

import numpy as np

from .geom import rz_apply
from .state import PSI, PSI_FRAME, ROBOT_DIM, T_FRAME, T_LOCAL

SIGMA_BEARING = 0.008


def sigma_distance(d):
    """Fitted range noise, metres: 0.0495 d + 0.0336."""
    return 0.0495 * np.asarray(d) + 0.0336


@dataclass
class Detection:
    observer_id: int
    p_rel: np.ndarray
    R_meas: np.ndarray

    def __post_init__(self):
        self.p_rel = np.asarray(self.p_rel, dtype=float).reshape(3)
        self.R_meas = np.asarray(self.R_meas, dtype=float).reshape(3, 3)


@dataclass
class BearingDistance:
    unit_dir: np.ndarray
    d: float

    def __post_init__(self):
        self.unit_dir = np.asarray(self.unit_dir, dtype=float).reshape(3)
        if abs(np.linalg.norm(self.unit_dir) - 1.0) > 1e-9:
            raise ValueError("unit_dir must have unit norm")


def _common_positions(x):
    r = x.reshape(x.shape[:-1] + (-1, ROBOT_DIM))
    return rz_apply(r[..., PSI_FRAME], r[..., T_LOCAL]) + r[..., T_FRAME], r[..., PSI]


def detection_h(x, observer_id, target_id):
    """Position of ``target_id`` in ``observer_id``'s yaw frame, for a state
    or a batch of states (..., 8N)."""
    if observer_id == target_id:
        raise ValueError("observer and target must differ")
    return stacked_detection_h(x, observer_id, [target_id])


def stacked_detection_h(x, observer_id, targets):
    """Concatenated detection predictions of ``targets`` seen by ``observer_id``.

    Returns shape (..., 3 * len(targets)).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // ROBOT_DIM
    targets = np.asarray(targets, dtype=int)
    if not 0 <= observer_id < n or np.any((targets < 0) | (targets >= n)):
        raise IndexError("robot id out of range")
    if np.any(targets == observer_id):
        raise ValueError("observer and target must differ")
    t, psi = _common_positions(x)
    rel = t[..., targets, :] - t[..., observer_id, None, :]
    z = rz_apply(-psi[..., observer_id, None], rel)
    return z.reshape(x.shape[:-1] + (3 * len(targets),))


def tangent_basis(u):
    """Two unit vectors completing ``u`` to a right-handed orthonormal basis."""
    u = np.asarray(u, dtype=float)
    a = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(a, u)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(u, e1)


def bearing_distance_to_cartesian(bd, sigma_b=SIGMA_BEARING, sigma_d_fn=sigma_distance):
    """Cartesian point and first-order covariance of a bearing/range reading.

    Range noise ``sigma_d_fn(d)`` acts along the bearing, angular noise
    ``d * sigma_b`` on the two orthogonal directions. The measured distance
    is used for both.
    """
    if not bd.d > 0:
        raise ValueError("distance must be positive, got %r" % (bd.d,))
    u = bd.unit_dir
    uu = np.outer(u, u)
    sd = float(sigma_d_fn(bd.d))
    R = sd ** 2 * uu + (bd.d * sigma_b) ** 2 * (np.eye(3) - uu)
    return bd.d * u, 0.5 * (R + R.T)
