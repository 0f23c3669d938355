"""Coupled probabilistic data association update for anonymous detections.

One robot acts as the *station*; every other robot is a *target*. The
station's detections are associated to targets through all valid
hypotheses, each hypothesis is weighted, and the joint state is updated with
the weighted mixture of per-hypothesis Kalman corrections.
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

from .association import (NONE, GateParams, enumerate_hypotheses,
                          hypothesis_scores, pairwise_innovations)
from .detection import stacked_detection_h
from .geom import wrap_angle
from .state import (ROBOT_DIM, SystemState, pin_reference, stabilize_covariance,
                    yaw_indices)
from .unscented import UtParams, measurement_stats

LOG_2PI = math.log(2.0 * math.pi)
DIM = 3


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


@dataclass
class CpdafParams:
    """Association model parameters.

    Attributes
    ----------
    p_d : detection probability, scalar or one value per robot
    lambda_fp : clutter spatial density (per m^3)
    volume : surveillance volume (m^3); ``lambda_fp * volume`` is the
        expected clutter count per scan
    clutter_exponent : ``"measurements"`` weights a hypothesis by
        ``lambda ** (M - D)``; ``"targets"`` uses ``lambda ** (L - D)``
    likelihood : ``"gaussian"`` (``exp(-mu' S^-1 mu / 2)``) or ``"paper"``
        (``exp(+mu' S^-1 mu)``, kept only for comparison runs)
    """

    p_d: Union[float, Sequence[float]] = 0.9
    lambda_fp: float = 1.0 / 4188.790204786391
    volume: float = 4188.790204786391
    clutter_exponent: str = "measurements"
    likelihood: str = "gaussian"

    def __post_init__(self):
        pd = np.atleast_1d(np.asarray(self.p_d, dtype=float))
        if np.any((pd < 0) | (pd > 1)) or not np.all(np.isfinite(pd)):
            raise ValueError("p_d must be in [0,1]")
        if not self.lambda_fp >= 0:
            raise ValueError("lambda_fp must be >= 0")
        if not self.volume > 0:
            raise ValueError("volume must be > 0")
        if self.clutter_exponent not in ("measurements", "targets"):
            raise ValueError("clutter_exponent must be 'measurements' or 'targets'")
        if self.likelihood not in ("gaussian", "paper"):
            raise ValueError("likelihood must be 'gaussian' or 'paper'")

    def detection_probs(self, targets):
        pd = np.atleast_1d(np.asarray(self.p_d, dtype=float))
        if pd.size == 1:
            return np.full(len(targets), float(pd[0]))
        return pd[np.asarray(targets, dtype=int)]


@dataclass
class WeightedHypothesis:
    hyp: tuple
    beta: float
    mu: np.ndarray
    S: np.ndarray


@dataclass
class UpdateReport:
    station: int
    n_measurements: int = 0
    n_targets: int = 0
    n_gated_pairs: int = 0
    n_enumerated: int = 0
    n_hypotheses: int = 0
    n_dropped: int = 0
    capped: bool = False
    skipped: bool = False
    beta_sum: float = 1.0
    wall_time_us: float = 0.0


def selector_matrix(phi, dim=DIM):
    """Block selector: one ``dim``-row block per detected target."""
    phi = np.asarray(phi, dtype=bool)
    rows = np.flatnonzero(phi)
    Phi = np.zeros((dim * rows.size, dim * phi.size))
    for r, j in enumerate(rows):
        Phi[dim * r:dim * (r + 1), dim * j:dim * (j + 1)] = np.eye(dim)
    return Phi


def _log_prior(H, pd, M, params):
    """Log of the clutter and detection factors for hypotheses H (K, L)."""
    L = H.shape[1]
    det = H != NONE
    D = det.sum(axis=1)
    lp = np.where(det, _log(pd)[None, :], _log(1.0 - pd)[None, :]).sum(axis=1)
    n_clutter = (M if params.clutter_exponent == "measurements" else L) - D
    log_lam = _log(params.lambda_fp)
    with np.errstate(invalid="ignore"):
        clutter = np.where(n_clutter == 0, 0.0, n_clutter * log_lam)
    return lp + clutter


def _log_likelihood(maha, logdet, D, params):
    norm = -0.5 * (DIM * D * LOG_2PI + logdet)
    if params.likelihood == "paper":
        return maha + norm
    return -0.5 * maha + norm


def hypothesis_weight(hyp, detections, stats, params, targets=None):
    """Unnormalized log weight, innovation and innovation covariance of one
    hypothesis.

    ``stats`` holds the stacked predicted target measurements without
    detection noise; each assigned detection's own covariance is added to
    its block of ``S``. ``targets`` gives the robot ids behind the target
    slots; it only matters for per-robot detection probabilities.

    Returns
    -------
    log_w, mu, S
    """
    L = stats.z_hat.shape[0] // DIM
    H = np.asarray(hyp, dtype=int).reshape(1, L)
    M = len(detections)
    sel = np.flatnonzero(H[0] != NONE)
    D = sel.size
    pd = params.detection_probs(range(L) if targets is None else targets)
    log_w = float(_log_prior(H, pd, M, params)[0])
    if D == 0:
        return log_w, np.zeros(0), np.zeros((0, 0))
    idx = (DIM * sel[:, None] + np.arange(DIM)).ravel()
    mu = np.concatenate([detections[H[0, j]].p_rel - stats.z_hat[DIM * j:DIM * (j + 1)]
                         for j in sel])
    S = stats.P_zz[np.ix_(idx, idx)].copy()
    for b, j in enumerate(sel):
        S[DIM * b:DIM * (b + 1), DIM * b:DIM * (b + 1)] += detections[H[0, j]].R_meas
    C = np.linalg.cholesky(S)
    w = np.linalg.solve(C, mu)
    logdet = 2.0 * np.log(np.diag(C)).sum()
    return log_w + float(_log_likelihood(w @ w, logdet, D, params)), mu, S


def normalize_weights(log_weights):
    """Normalize log weights to probabilities (log-sum-exp)."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise ValueError("normalize_weights: no positive finite weight")
    m = np.max(lw[np.isfinite(lw)])
    w = np.exp(np.where(np.isfinite(lw), lw - m, -np.inf))
    return w / w.sum()


def station_stats(state, station, targets, params=UtParams()):
    """Unscented statistics of the station's stacked target measurements
    (no measurement noise added)."""
    m = DIM * len(targets)
    return measurement_stats(state.x, state.P,
                             lambda pts: stacked_detection_h(pts, station, targets),
                             np.zeros((m, m)), params)


def _finish(x, P):
    n = x.shape[0] // ROBOT_DIM
    yi = yaw_indices(n)
    x[yi] = wrap_angle(x[yi])
    state = pin_reference(SystemState(x, P))
    state.P, _ = stabilize_covariance(state.P)
    return state


def cpdaf_update(state, station, detections, params=CpdafParams(), gp=GateParams(),
                 ut=UtParams(), max_hypotheses=10_000, return_hypotheses=False):
    """Update the joint state with one station's anonymous detections.

    Parameters
    ----------
    state : SystemState
    station : int
        Observing robot (0-based).
    detections : list of Detection
    max_hypotheses : int or None
        When more valid hypotheses exist, keep only the best ones under an
        additive per-pair score. ``None`` disables the cap.
    return_hypotheses : bool
        Also return the list of WeightedHypothesis (slow; for inspection).

    Returns
    -------
    new_state, report[, weighted_hypotheses]
    """
    t0 = time.perf_counter()
    n = state.n_robots
    targets = [j for j in range(n) if j != station]
    L, M = len(targets), len(detections)
    report = UpdateReport(station=station, n_measurements=M, n_targets=L)

    def done(new_state, whyps=None):
        report.wall_time_us = (time.perf_counter() - t0) * 1e6
        if return_hypotheses:
            return new_state, report, whyps or []
        return new_state, report

    if M == 0 or L == 0:
        report.n_enumerated = report.n_hypotheses = 1
        return done(state.copy())

    stats = station_stats(state, station, targets, ut)
    d2, logdet1 = pairwise_innovations(detections, stats)
    gm = d2 <= gp.gamma
    report.n_gated_pairs = int(gm.sum())
    pd = params.detection_probs(targets)

    hyps = enumerate_hypotheses(gm)
    report.n_enumerated = len(hyps)
    H = np.asarray(hyps, dtype=int).reshape(len(hyps), L)
    log_prior = _log_prior(H, pd, M, params)
    keep = np.isfinite(log_prior)
    H, log_prior = H[keep], log_prior[keep]
    if max_hypotheses is not None and len(H) > max_hypotheses:
        pair = (_log(pd)[:, None] - math.log(max(params.lambda_fp, 1e-300))
                + _log_likelihood(d2, logdet1, 1, params))
        s = hypothesis_scores([tuple(h) for h in H], pair, _log(1.0 - pd))
        order = np.sort(np.argsort(-s, kind="stable")[:max_hypotheses])
        H, log_prior = H[order], log_prior[order]
        report.capped = True
    if len(H) == 0:
        report.skipped = True
        report.n_hypotheses = 0
        return done(state.copy())

    Z = np.array([d.p_rel for d in detections])
    Rm = np.array([d.R_meas for d in detections])
    zh = stats.z_hat.reshape(L, DIM)

    detected = H != NONE
    n_det = detected.sum(axis=1)
    log_w = np.full(len(H), -np.inf)
    batches = []
    for D in np.unique(n_det):
        members = np.flatnonzero(n_det == D)
        if D == 0:
            log_w[members] = log_prior[members]
            continue
        K = len(members)
        sel = np.nonzero(detected[members])[1].reshape(K, D)      # targets
        A = H[members][detected[members]].reshape(K, D)           # detections
        idx = (DIM * sel[:, :, None] + np.arange(DIM)).reshape(K, DIM * D)
        mu = (Z[A] - zh[sel]).reshape(K, DIM * D)
        S = stats.P_zz[idx[:, :, None], idx[:, None, :]]
        for b in range(D):
            S[:, DIM * b:DIM * (b + 1), DIM * b:DIM * (b + 1)] += Rm[A[:, b]]
        try:
            C = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            ok = np.ones(K, dtype=bool)
            C = np.zeros_like(S)
            for k in range(K):
                try:
                    C[k] = np.linalg.cholesky(S[k])
                except np.linalg.LinAlgError:
                    ok[k] = False
            report.n_dropped += int((~ok).sum())
            members, idx, mu, S, C = members[ok], idx[ok], mu[ok], S[ok], C[ok]
            if len(members) == 0:
                continue
        Sinv = np.linalg.inv(S)
        a = np.einsum("kij,kj->ki", Sinv, mu)
        maha = np.einsum("ki,ki->k", mu, a)
        ld = 2.0 * np.log(np.diagonal(C, axis1=-2, axis2=-1)).sum(-1)
        log_w[members] = log_prior[members] + _log_likelihood(maha, ld, D, params)
        batches.append((members, idx, a, Sinv, mu, S))

    finite = np.isfinite(log_w)
    if not np.any(finite):
        report.skipped = True
        return done(state.copy())
    beta = normalize_weights(log_w)
    report.n_hypotheses = int(finite.sum())
    report.beta_sum = float(beta.sum())

    # Mixture terms scattered into the full stacked-measurement space:
    # abar = sum_k beta_k a_k and W = sum_k beta_k (S_k^-1 - a_k a_k'),
    # each hypothesis occupying the rows of its detected targets.
    m = DIM * L
    abar = np.zeros(m)
    W = np.zeros(m * m)
    for members, idx, a, Sinv, _, _ in batches:
        b = beta[members]
        abar += np.bincount(idx.ravel(), weights=(b[:, None] * a).ravel(), minlength=m)
        Wk = b[:, None, None] * (Sinv - a[:, :, None] * a[:, None, :])
        flat = idx[:, :, None] * m + idx[:, None, :]
        W += np.bincount(flat.ravel(), weights=Wk.ravel(), minlength=m * m)
    W = W.reshape(m, m)
    delta = stats.P_zx.T @ abar
    P = state.P - stats.P_zx.T @ W @ stats.P_zx - np.outer(delta, delta)
    new_state = _finish(state.x + delta, P)

    whyps = None
    if return_hypotheses:
        whyps = []
        none_members = np.flatnonzero(n_det == 0)
        for k in none_members:
            whyps.append(WeightedHypothesis(tuple(H[k]), float(beta[k]),
                                            np.zeros(0), np.zeros((0, 0))))
        for members, _, _, _, mu, S in batches:
            for i, k in enumerate(members):
                whyps.append(WeightedHypothesis(tuple(H[k]), float(beta[k]), mu[i], S[i]))
        whyps.sort(key=lambda w: w.hyp)
    return done(new_state, whyps)


def station_sweep(state, detections_by_robot, params=CpdafParams(), gp=GateParams(),
                  ut=UtParams(), order=None, max_hypotheses=10_000):
    """Run :func:`cpdaf_update` with every robot as the station in turn.

    Each station starts from the previous station's posterior. ``order``
    defaults to ascending robot index.

    Returns
    -------
    state, list of UpdateReport
    """
    reports: List[UpdateReport] = []
    order = range(state.n_robots) if order is None else order
    for s in order:
        dets = detections_by_robot[s] if s < len(detections_by_robot) else []
        if not dets:
            continue
        state, rep = cpdaf_update(state, s, dets, params, gp, ut, max_hypotheses)
        reports.append(rep)
    return state, reports
