"""Scaled unscented transform: sigma points and measurement statistics."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geom import wrap_angle


@dataclass(frozen=True)
class UtParams:
    """Scaled-UT parameters. ``kappa=None`` means ``3 - n``."""

    alpha: float = 1.0
    beta: float = 2.0
    kappa: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")

    def lam(self, n):
        kappa = 3.0 - n if self.kappa is None else self.kappa
        if not n + kappa > 0:
            raise ValueError("n + kappa must be positive (n=%d, kappa=%g)" % (n, kappa))
        return self.alpha ** 2 * (n + kappa) - n

    def weights(self, n):
        lam = self.lam(n)
        wm = np.full(2 * n + 1, 0.5 / (n + lam))
        wc = wm.copy()
        wm[0] = lam / (n + lam)
        wc[0] = wm[0] + 1.0 - self.alpha ** 2 + self.beta
        return wm, wc


@dataclass
class SigmaPoints:
    points: np.ndarray  # (2n+1, n)
    wm: np.ndarray
    wc: np.ndarray


@dataclass
class MeasStats:
    """Predicted measurement mean, innovation covariance (noise included) and
    measurement/state cross-covariance."""

    z_hat: np.ndarray
    P_zz: np.ndarray
    P_zx: np.ndarray


def _scaled_sqrt(P, scale):
    """Lower-triangular S with S S^T = scale * P, tolerating zero-variance rows."""
    n = P.shape[0]
    S = np.zeros((n, n))
    live = np.flatnonzero(np.diag(P) > 0)
    if live.size == 0:
        return S
    B = P[np.ix_(live, live)]
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        B = 0.5 * (B + B.T)
        B = B + np.eye(live.size) * 1e-9 * np.trace(B) / live.size
        try:
            L = np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            min_eig = np.linalg.eigvalsh(0.5 * (P + P.T))[0]
            raise np.linalg.LinAlgError(
                "sigma points: covariance not positive semidefinite "
                "(smallest eigenvalue %.3e)" % min_eig) from None
    S[np.ix_(live, live)] = np.sqrt(scale) * L
    return S


def sigma_points(x, P, params=UtParams()):
    """The 2n+1 scaled sigma points of N(x, P) and their weights."""
    x = np.asarray(x, dtype=float)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = x.shape[0]
    lam = params.lam(n)
    S = _scaled_sqrt(P, n + lam)
    pts = np.empty((2 * n + 1, n))
    pts[0] = x
    pts[1:n + 1] = x + S.T
    pts[n + 1:] = x - S.T
    wm, wc = params.weights(n)
    return SigmaPoints(pts, wm, wc)


def _psd_part(C):
    w, V = np.linalg.eigh(C)
    if w[0] >= 0:
        return C
    return (V * np.clip(w, 0.0, None)) @ V.T


def measurement_stats(x, P, h, R, params=UtParams(), angle_mask=None,
                      vectorized=True, sp=None):
    """Unscented statistics of ``z = h(x) + v``, ``v ~ N(0, R)``.

    Parameters
    ----------
    h : callable
        Measurement function. With ``vectorized=True`` it receives the whole
        (2n+1, n) array of sigma points and returns (2n+1, m); otherwise it is
        applied row by row.
    angle_mask : bool array (m,), optional
        Components that are angles; their mean is circular and residuals
        are wrapped.
    sp : SigmaPoints, optional
        Precomputed sigma points of (x, P).

    Returns
    -------
    MeasStats
    """
    x = np.asarray(x, dtype=float)
    if sp is None:
        sp = sigma_points(x, P, params)
    Z = h(sp.points) if vectorized else np.array([h(p) for p in sp.points])
    Z = np.asarray(Z, dtype=float).reshape(sp.points.shape[0], -1)
    z_hat = sp.wm @ Z
    dZ = Z - z_hat
    if angle_mask is not None and np.any(angle_mask):
        ang = np.asarray(angle_mask, dtype=bool)
        z_hat[ang] = np.arctan2(sp.wm @ np.sin(Z[:, ang]), sp.wm @ np.cos(Z[:, ang]))
        dZ[:, ang] = wrap_angle(Z[:, ang] - z_hat[ang])
    dX = sp.points - x
    wdZ = dZ * sp.wc[:, None]
    # A negative central weight can make the sample covariance indefinite
    # for strongly nonlinear h; keep only its PSD part.
    P_zz = _psd_part(0.5 * (wdZ.T @ dZ + dZ.T @ wdZ)) + np.asarray(R, dtype=float)
    P_zx = wdZ.T @ dX
    return MeasStats(z_hat, P_zz, P_zx)


def kalman_correct(x, P, stats, innovation):
    """Apply a Kalman correction given unscented statistics.

    Returns the corrected ``(x, P)``; the caller wraps angles and cleans up
    the covariance.
    """
    L = np.linalg.cholesky(stats.P_zz)
    # K = P_xz P_zz^-1, via two triangular solves
    A = np.linalg.solve(L, stats.P_zx)       # L^-1 P_zx
    b = np.linalg.solve(L, innovation)        # L^-1 nu
    x = x + A.T @ b
    P = P - A.T @ A
    return x, P
