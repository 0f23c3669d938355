"""Validation gating and enumeration of association hypotheses.

A hypothesis assigns every target either a measurement index or ``NONE``
(missed). Hypotheses are plain tuples of ints so they hash, sort and compare
cheaply; ``NONE`` is ``-1`` and therefore sorts first at every level.
"""
import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

NONE = -1
MAX_MEASUREMENTS = 64


def chi2_inv(p, dof):
    """Inverse chi-squared CDF: gamma such that P(chi2_dof <= gamma) = p."""
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1), got %r" % (p,))
    if int(dof) != dof or dof < 1:
        raise ValueError("dof must be a positive integer")
    return _chi2_ppf(float(p), int(dof))


@functools.lru_cache(maxsize=64)
def _chi2_ppf(p, dof):
    return float(chi2.ppf(p, dof))


@dataclass(frozen=True)
class GateParams:
    """Gate significance level ``p_g`` for ``dof``-dimensional innovations.
    ``p_g=1`` or ``enabled=False`` admits every pair (infinite threshold)."""

    p_g: float = 0.99
    dof: int = 3
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.p_g <= 1:
            raise ValueError("p_g must be in (0, 1]")

    @property
    def gamma(self):
        if not self.enabled or self.p_g == 1:
            return np.inf
        return chi2_inv(self.p_g, self.dof)


def pairwise_innovations(detections, stats, dim=3):
    """Squared Mahalanobis distance and log-determinant for every
    (target, measurement) pair.

    Target ``j`` occupies rows ``dim*j : dim*(j+1)`` of ``stats``; the
    detection's own covariance is added to that block.

    Returns
    -------
    d2, logdet : (L, M) arrays
    """
    L = stats.z_hat.shape[0] // dim
    M = len(detections)
    if M == 0:
        return np.zeros((L, 0)), np.zeros((L, 0))
    Z = np.array([d.p_rel for d in detections])
    Rm = np.array([d.R_meas for d in detections])
    zh = stats.z_hat.reshape(L, dim)
    blocks = np.array([stats.P_zz[dim * j:dim * (j + 1), dim * j:dim * (j + 1)]
                       for j in range(L)])
    S = blocks[:, None] + Rm[None]                     # (L, M, d, d)
    nu = Z[None] - zh[:, None]                          # (L, M, d)
    C = np.linalg.cholesky(S)
    w = np.linalg.solve(C, nu[..., None])[..., 0]
    d2 = np.einsum("lmi,lmi->lm", w, w)
    logdet = 2.0 * np.log(np.diagonal(C, axis1=-2, axis2=-1)).sum(-1)
    return d2, logdet


def gate(detections, stats, gp=GateParams()):
    """Boolean (L, M) table: measurement m lies inside target j's gate."""
    d2, _ = pairwise_innovations(detections, stats, gp.dof)
    return d2 <= gp.gamma


def _check_gate(gm):
    gm = np.asarray(gm, dtype=bool)
    if gm.ndim != 2:
        raise ValueError("gate matrix must be 2-D")
    if gm.shape[1] > MAX_MEASUREMENTS:
        raise ValueError("at most %d measurements supported" % MAX_MEASUREMENTS)
    return gm


def enumerate_hypotheses(gm):
    """Every valid hypothesis, by depth-first traversal of the hypothesis tree.

    Level j of the tree holds ``NONE`` plus the measurements admissible for
    target j; a root-to-leaf path is valid when no measurement repeats.
    The traversal uses an explicit stack and a bitmask of used measurements.
    Output order is lexicographic (``NONE`` first at each level).
    """
    gm = _check_gate(gm)
    L = gm.shape[0]
    options = [[NONE] + np.flatnonzero(gm[j]).tolist() for j in range(L)]
    out = []
    stack = [(0, 0, ())]
    while stack:
        level, used, path = stack.pop()
        if level == L:
            out.append(path)
            continue
        for m in reversed(options[level]):
            if m == NONE:
                stack.append((level + 1, used, path + (NONE,)))
            elif not (used >> m) & 1:
                stack.append((level + 1, used | (1 << m), path + (m,)))
    return out


def is_valid_hypothesis(hyp, gm):
    gm = np.asarray(gm, dtype=bool)
    if len(hyp) != gm.shape[0]:
        return False
    chosen = [m for m in hyp if m != NONE]
    if len(set(chosen)) != len(chosen):
        return False
    return all(m == NONE or (0 <= m < gm.shape[1] and gm[j, m]) for j, m in enumerate(hyp))


def brute_force_hypotheses(gm):
    """Reference enumeration: filter every tuple in {NONE, 0..M-1}^L."""
    gm = _check_gate(gm)
    L, M = gm.shape
    if L > 6 or M > 6:
        raise ValueError("brute force limited to 6x6 gate matrices")
    return [h for h in itertools.product(range(NONE, M), repeat=L)
            if is_valid_hypothesis(h, gm)]


def count_hypotheses(L, M):
    """Number of hypotheses when every pair is admissible:
    sum over D of C(L, D) C(M, D) D!."""
    if L < 0 or M < 0:
        raise ValueError("L and M must be non-negative")
    return sum(math.comb(L, D) * math.comb(M, D) * math.factorial(D)
               for D in range(min(L, M) + 1))


def hypothesis_scores(hyps, log_scores, miss_log_scores):
    """Additive score of each hypothesis from per-pair log scores."""
    log_scores = np.asarray(log_scores, dtype=float)
    L, M = log_scores.shape
    if not hyps:
        return np.zeros(0)
    table = np.concatenate([log_scores, np.asarray(miss_log_scores, float).reshape(L, 1)], 1)
    H = np.asarray(hyps, dtype=int).reshape(len(hyps), L)
    H = np.where(H == NONE, M, H)
    return table[np.arange(L), H].sum(axis=1)


def k_best_hypotheses(gm, log_scores, miss_log_scores, k):
    """The ``k`` valid hypotheses with the highest additive log score.

    ``log_scores[j, m]`` scores assigning measurement m to target j and
    ``miss_log_scores[j]`` scores target j going undetected. Ties keep
    lexicographic order. Fewer than ``k`` are returned if fewer exist.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    hyps = enumerate_hypotheses(gm)
    if not hyps:
        return []
    s = hypothesis_scores(hyps, log_scores, miss_log_scores)
    order = np.argsort(-s, kind="stable")[:k]
    return [hyps[i] for i in order]
