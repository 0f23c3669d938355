"""Acquisition of unknown odometry frames by multi-view registration.

With no knowledge of a robot's frame offset its yaw is uniform on the
circle, which a Gaussian filter cannot represent. Before the association
filter takes over, each unknown robot is located by registering its own
anonymous view of the team against the reference robot's view:

* the reference robot's detections give candidate positions in the common
  frame;
* for a candidate position and one pairing of an own detection with another
  candidate, the robot's yaw follows from the bearing difference;
* the pose hypothesis is scored by how many other candidates land inside the
  gates of the robot's remaining detections.

Candidates are then assigned to robots one-to-one by score.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import chi2_inv
from .geom import rz_apply, rz_matrix, wrap_angle
from .state import PSI, PSI_FRAME, ROBOT_DIM, T_FRAME, T_LOCAL

NO_MATCH = -1e9


@dataclass
class Registration:
    robot: int
    position: np.ndarray
    psi: float
    n_support: int
    score: float


def _yaw_fit(v_common, w_body):
    """Yaw minimizing sum |Rz(psi) w - v|^2 over matched xy pairs."""
    v = np.atleast_2d(v_common)[:, :2]
    w = np.atleast_2d(w_body)[:, :2]
    cross = np.sum(w[:, 0] * v[:, 1] - w[:, 1] * v[:, 0])
    dot = np.sum(w[:, 0] * v[:, 0] + w[:, 1] * v[:, 1])
    return float(np.arctan2(cross, dot))


def _support(cands, cand_cov, a, psi, dets, gamma):
    """Candidates (other than ``a``) explained by ``dets`` for a robot at
    candidate ``a`` with yaw ``psi``, matched one-to-one inside the gate.

    Returns the match count, a score (summed gate margin) and the matched
    candidate and detection indices."""
    p = cands[a]
    idx = [b for b in range(len(cands)) if b != a]
    if not idx or not dets:
        return 0, 0.0, [], []
    rel = rz_apply(-psi, cands[idx] - p)
    Rt = rz_matrix(psi)
    Z = np.array([d.p_rel for d in dets])
    Rm = np.array([d.R_meas for d in dets])
    Sb = Rt.T @ (cand_cov[idx] + cand_cov[a]) @ Rt
    S = Sb[:, None] + Rm[None]
    nu = Z[None] - rel[:, None]
    d2 = np.einsum("rmi,rmi->rm", nu, np.linalg.solve(S, nu[..., None])[..., 0])
    cost = np.where(d2 <= gamma, d2, 1e6)
    rows, cols = linear_sum_assignment(cost)
    keep = cost[rows, cols] < 1e6
    rows, cols = rows[keep], cols[keep]
    return int(keep.sum()), float(np.sum(gamma - d2[rows, cols])), \
        [idx[r] for r in rows], cols.tolist()


def register(state, detections, unknown, p_gate=0.99, min_support=2):
    """Locate ``unknown`` robots from one frame of detections.

    Parameters
    ----------
    state : SystemState
        Current belief; robot 0's pose and every robot's odometry-frame
        position are taken from it.
    detections : list of list of Detection
    unknown : iterable of int
        Robots whose frame offset is still unknown.
    min_support : int
        Matched detections a pose hypothesis needs, including the one that
        anchors its yaw; capped at N - 1 so that pairs of robots register.

    Returns
    -------
    list of Registration
    """
    gamma = chi2_inv(p_gate, 3)
    min_support = min(min_support, state.n_robots - 1)
    unknown = [k for k in unknown if k != 0 and detections[k]]
    if not unknown or not detections[0]:
        return []
    poses = state.poses()
    p0, psi0 = poses[0, :3], poses[0, 3]
    R0 = rz_matrix(psi0)
    cands = [p0] + [p0 + R0 @ d.p_rel for d in detections[0]]
    cand_cov = [np.zeros((3, 3))] + [R0 @ d.R_meas @ R0.T for d in detections[0]]
    known = [j for j in range(1, state.n_robots) if j not in unknown]
    for j in known:
        cands.append(poses[j, :3])
        cand_cov.append(state.P[np.ix_(range(8 * j + 4, 8 * j + 7),
                                       range(8 * j + 4, 8 * j + 7))])
    cands = np.array(cands)
    cand_cov = np.array(cand_cov)
    n_det0 = len(detections[0])

    best = {}
    score = np.full((len(unknown), n_det0), NO_MATCH)
    for r, k in enumerate(unknown):
        dets = detections[k]
        Z = np.array([d.p_rel for d in dets])
        for a in range(1, n_det0 + 1):
            p = cands[a]
            for b in range(len(cands)):
                if b == a:
                    continue
                v = cands[b] - p
                dist = np.linalg.norm(v)
                for m in range(len(dets)):
                    # range consistency before solving for yaw
                    sd = np.sqrt(np.trace(dets[m].R_meas) + np.trace(cand_cov[a])
                                 + np.trace(cand_cov[b]))
                    if abs(np.linalg.norm(Z[m]) - dist) > 3.0 * sd:
                        continue
                    psi = _yaw_fit(v, Z[m])
                    n_sup, s, bs, ms = _support(cands, cand_cov, a, psi, dets, gamma)
                    if n_sup < min_support:
                        continue
                    psi = _yaw_fit(cands[bs] - p, Z[ms])
                    if s > score[r, a - 1]:
                        score[r, a - 1] = s
                        best[(r, a)] = (psi, n_sup)
    rows, cols = linear_sum_assignment(-score)
    out = []
    for r, c in zip(rows, cols):
        if score[r, c] <= NO_MATCH / 2:
            continue
        # reject if another candidate scores almost as well for this robot
        others = np.delete(score[r], c)
        if others.size and np.max(others) >= 0.8 * score[r, c] and np.max(others) > 0:
            continue
        psi, n_sup = best[(r, c + 1)]
        out.append(Registration(unknown[r], cands[c + 1].copy(), psi, n_sup, float(score[r, c])))
    return out


def apply_registration(state, reg, sigma_p, sigma_psi):
    """Reset robot ``reg.robot``'s frame offset and global yaw to the
    registered pose, decorrelated from the rest of the state."""
    k = reg.robot
    b = ROBOT_DIM * k
    x = state.x
    local = x[b + T_LOCAL.start:b + T_LOCAL.stop]
    yaw_local = wrap_angle(x[b + PSI] - x[b + PSI_FRAME])
    psi_f = wrap_angle(reg.psi - yaw_local)
    x[b + T_FRAME.start:b + T_FRAME.stop] = reg.position - rz_apply(psi_f, local)
    x[b + PSI_FRAME] = psi_f
    x[b + PSI] = wrap_angle(reg.psi)
    P = state.P
    var_local = P[b + PSI, b + PSI] + P[b + PSI_FRAME, b + PSI_FRAME] \
        - 2 * P[b + PSI, b + PSI_FRAME]
    idx = [b + PSI, b + 4, b + 5, b + 6, b + PSI_FRAME]
    P[idx, :] = 0.0
    P[:, idx] = 0.0
    for i in (b + 4, b + 5, b + 6):
        P[i, i] = sigma_p ** 2
    P[b + PSI_FRAME, b + PSI_FRAME] = sigma_psi ** 2
    P[b + PSI, b + PSI] = sigma_psi ** 2 + max(var_local, 0.0)
    P[b + PSI, b + PSI_FRAME] = P[b + PSI_FRAME, b + PSI] = sigma_psi ** 2
    return state
