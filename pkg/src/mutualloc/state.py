"""Coupled multi-robot state, process model and covariance hygiene.

Each robot contributes eight components::

    [t_local (3), psi_global, t_frame (3), psi_frame]

``t_local`` is the robot position in its own odometry frame f_i,
``psi_global`` its yaw in the common frame, and ``(t_frame, psi_frame)`` the
pose of f_i in the common frame. Robot 0 is the reference: its frame offset
is pinned to the identity with zero variance.
"""
from dataclasses import dataclass

import numpy as np

from .geom import rz_apply, wrap_angle

ROBOT_DIM = 8
T_LOCAL = slice(0, 3)
PSI = 3
T_FRAME = slice(4, 7)
PSI_FRAME = 7


def robot_slice(i):
    return slice(ROBOT_DIM * i, ROBOT_DIM * (i + 1))


def yaw_indices(n_robots):
    """Indices of every angular component of the stacked state."""
    base = ROBOT_DIM * np.arange(n_robots)
    return np.sort(np.concatenate([base + PSI, base + PSI_FRAME]))


def reference_frame_indices():
    return np.arange(4, 8)


def n_robots_of(x):
    n, rem = divmod(np.shape(x)[-1], ROBOT_DIM)
    if rem:
        raise ValueError("state dimension %d is not a multiple of %d"
                         % (np.shape(x)[-1], ROBOT_DIM))
    return n


@dataclass
class SystemState:
    """Mean ``x`` (8N,) and covariance ``P`` (8N, 8N) of the joint belief."""

    x: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        n = self.x.shape[0]
        n_robots_of(self.x)
        if self.P.shape != (n, n):
            raise ValueError("covariance shape %s does not match state dim %d"
                             % (self.P.shape, n))

    @property
    def n_robots(self):
        return self.x.shape[0] // ROBOT_DIM

    def copy(self):
        return SystemState(self.x.copy(), self.P.copy())

    def robot(self, i):
        return self.x[robot_slice(i)]

    def poses(self):
        """Robot poses in the common frame as an (N, 4) array [x, y, z, yaw]."""
        return poses_from_x(self.x)


def poses_from_x(x):
    """Common-frame poses for a state vector, or a batch of them (..., 8N)."""
    x = np.asarray(x)
    r = x.reshape(x.shape[:-1] + (-1, ROBOT_DIM))
    t = rz_apply(r[..., PSI_FRAME], r[..., T_LOCAL]) + r[..., T_FRAME]
    out = np.empty(r.shape[:-1] + (4,))
    out[..., :3] = t
    out[..., 3] = r[..., PSI]
    return out


@dataclass
class ProcessNoiseConfig:
    """Continuous-time process-noise intensities.

    Attributes
    ----------
    sigma_v : velocity noise, m/s per axis
    sigma_omega : yaw-rate noise, rad/s
    sigma_drift_p : frame position drift, m/sqrt(s)
    sigma_drift_psi : frame yaw drift, rad/sqrt(s)
    """

    sigma_v: float = 0.05
    sigma_omega: float = 0.01
    sigma_drift_p: float = 1e-4
    sigma_drift_psi: float = 1e-5

    def __post_init__(self):
        for name in ("sigma_v", "sigma_omega", "sigma_drift_p", "sigma_drift_psi"):
            if not getattr(self, name) >= 0:
                raise ValueError("%s must be >= 0" % name)

    def diagonal(self, n_robots):
        """Diagonal of Q for the stacked state; reference drift forced to zero."""
        per = np.array([self.sigma_v] * 3 + [self.sigma_omega]
                       + [self.sigma_drift_p] * 3 + [self.sigma_drift_psi]) ** 2
        q = np.tile(per, n_robots)
        q[reference_frame_indices()] = 0.0
        return q


def predict(state, u, dt, q):
    """Propagate the belief one step with zero-order hold on ``u``.

    ``u`` is (N, 4): velocity in each robot's own frame f_i and yaw rate.
    F is the identity, so only the mean moves by ``G u`` and the covariance
    grows by ``Q dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive, got %r" % (dt,))
    n = state.n_robots
    u = np.asarray(u, dtype=float)
    if u.shape != (n, 4):
        raise ValueError("control input shape %s, expected (%d, 4)" % (u.shape, n))
    x = state.x.copy()
    r = x.reshape(n, ROBOT_DIM)
    r[:, T_LOCAL] += u[:, :3] * dt
    r[:, PSI] += u[:, 3] * dt
    r[:, PSI] = wrap_angle(r[:, PSI])
    P = state.P.copy()
    idx = np.arange(P.shape[0])
    P[idx, idx] += q.diagonal(n) * dt
    return SystemState(x, P)


def pin_reference(state):
    """Force the reference robot's frame offset to the identity, in place."""
    ref = reference_frame_indices()
    state.x[ref] = 0.0
    state.P[ref, :] = 0.0
    state.P[:, ref] = 0.0
    return state


def stabilize_covariance(P, tol=1e-9):
    """Symmetrize ``P`` and clamp negative eigenvalues to zero.

    Returns ``(P_clean, min_eig)`` where ``min_eig`` is the smallest eigenvalue
    seen before clamping (``0.0`` when the fast positive-definiteness check
    passes). A min eigenvalue below ``-tol * scale`` signals a real defect and
    raises ``np.linalg.LinAlgError``.
    """
    P = 0.5 * (P + P.T)
    d = np.diag(P).copy()
    if np.any(d < 0):
        min_eig = None
    else:
        live = d > 0
        try:
            np.linalg.cholesky(P[np.ix_(live, live)])
            return P, 0.0
        except np.linalg.LinAlgError:
            min_eig = None
    w, V = np.linalg.eigh(P)
    min_eig = float(w[0])
    scale = max(1.0, float(np.max(np.abs(w))))
    if min_eig < -tol * scale:
        raise np.linalg.LinAlgError(
            "covariance indefinite: smallest eigenvalue %.3e" % min_eig)
    w = np.clip(w, 0.0, None)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T), min_eig


def initial_state(local_poses, sigma_t_local=0.01, sigma_psi_local=0.002,
                  frame_mean=None, sigma_frame_p=5.0, sigma_frame_psi=np.pi):
    """Build a prior from each robot's first odometry reading.

    Parameters
    ----------
    local_poses : (N, 4) array
        Odometry poses ``[t_local, yaw_local]`` in each robot's own frame.
    frame_mean : (N, 4) array, optional
        Prior mean of every frame offset; zeros ("no knowledge") by default.
        Row 0 is ignored, the reference frame is always the identity.
    sigma_frame_p, sigma_frame_psi : float
        Prior spread on the unknown frame offsets of robots 1..N-1.

    The global yaw prior is built as ``yaw_local + psi_frame`` so the two yaw
    components start correctly correlated.
    """
    local_poses = np.asarray(local_poses, dtype=float)
    n = local_poses.shape[0]
    frame = np.zeros((n, 4)) if frame_mean is None else np.array(frame_mean, dtype=float)
    frame[0] = 0.0
    x = np.zeros(ROBOT_DIM * n)
    P = np.zeros((ROBOT_DIM * n, ROBOT_DIM * n))
    for i in range(n):
        s = robot_slice(i)
        r = x[s]
        r[T_LOCAL] = local_poses[i, :3]
        r[T_FRAME] = frame[i, :3]
        r[PSI_FRAME] = wrap_angle(frame[i, 3])
        r[PSI] = wrap_angle(local_poses[i, 3] + frame[i, 3])
        b = ROBOT_DIM * i
        P[b:b + 3, b:b + 3] = np.eye(3) * sigma_t_local ** 2
        if i == 0:
            P[b + PSI, b + PSI] = sigma_psi_local ** 2
            continue
        vf = sigma_frame_psi ** 2
        P[b + 4:b + 7, b + 4:b + 7] = np.eye(3) * sigma_frame_p ** 2
        P[b + PSI_FRAME, b + PSI_FRAME] = vf
        P[b + PSI, b + PSI] = vf + sigma_psi_local ** 2
        P[b + PSI, b + PSI_FRAME] = P[b + PSI_FRAME, b + PSI] = vf
    return SystemState(x, P)
