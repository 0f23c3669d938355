"""Planar-yaw rotation and frame composition.

All unknown rotation in this package is a rotation about the gravity axis, so
rotations are carried as scalar yaw angles and applied directly to 3-vectors.
Angles live in the half-open interval (-pi, pi].
"""
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap an angle (or array of angles) into (-pi, pi].

    ``-pi`` maps to ``pi`` so every angle has exactly one representation.

    Raises
    ------
    ValueError
        If any input is NaN or infinite.
    """
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("wrap_angle: non-finite angle %r" % (a,))
    out = np.pi - np.mod(np.pi - arr, TWO_PI)
    if out.ndim == 0:
        return float(out)
    return out


def rz_apply(psi, v):
    """Rotate the x/y components of ``v`` by ``psi`` about +Z.

    Broadcasts: ``psi`` of shape (...) and ``v`` of shape (..., 3).
    """
    v = np.asarray(v, dtype=float)
    c = np.cos(psi)
    s = np.sin(psi)
    out = np.empty(np.broadcast_shapes(np.shape(c) + (3,), v.shape))
    out[..., 0] = c * v[..., 0] - s * v[..., 1]
    out[..., 1] = s * v[..., 0] + c * v[..., 1]
    out[..., 2] = v[..., 2]
    return out


def rz_matrix(psi):
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose2z:
    """Position plus yaw. The yaw is wrapped on construction."""

    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    psi: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("Pose2z: non-finite position")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def as_array(self):
        return np.append(self.t, self.psi)


IDENTITY = Pose2z()


def compose_to_common(frame_offset, local):
    """Express ``local`` (a pose in frame f_i) in the common frame.

    ``frame_offset`` is the pose of f_i in the common frame.
    """
    t = rz_apply(frame_offset.psi, local.t) + frame_offset.t
    return Pose2z(t, frame_offset.psi + local.psi)


def invert_pose(p):
    """Group inverse: ``compose_to_common(p, invert_pose(p)) == IDENTITY``."""
    return Pose2z(-rz_apply(-p.psi, p.t), -p.psi)


def express_in(frame_offset, pose):
    """Inverse of :func:`compose_to_common`: pose given in the common frame,
    returned in the frame ``frame_offset``."""
    return Pose2z(rz_apply(-frame_offset.psi, pose.t - frame_offset.t),
                  pose.psi - frame_offset.psi)
