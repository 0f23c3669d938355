"""Estimator-style front end for the mutual localization filter."""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .association import GateParams
from .bootstrap import apply_registration, register
from .cpdaf import CpdafParams, station_sweep
from .detection import Detection
from .odometry import OdomMeasurement, OdomNoise, odom_update_all
from .state import ProcessNoiseConfig, initial_state, predict
from .unscented import UtParams
from .validation import check_array, check_frame, check_positive, check_probability

SPHERE_10M = 4.0 / 3.0 * np.pi * 10.0 ** 3


@dataclass
class Frame:
    """Everything the filter receives over one time step.

    ``controls`` is (N, 4): velocity in each robot's odometry frame and yaw
    rate, held over ``dt``. ``odometry`` and ``detections`` are ``None`` on
    steps where that sensor did not report; ``detections[i]`` lists robot i's
    anonymous detections.
    """

    dt: float
    controls: np.ndarray
    odometry: Optional[List[OdomMeasurement]] = None
    detections: Optional[List[List[Detection]]] = None


class MutualLocalizer(BaseEstimator):
    """Anonymous mutual localization of a robot team.

    Fuses per-robot odometry with unlabeled robot-to-robot detections and
    estimates every robot's pose in the frame of robot 0.

    ``fit(frames)`` starts a new track from the odometry of ``frames[0]`` and
    filters the remaining frames; ``partial_fit`` advances by one frame;
    ``predict`` returns the current (N, 4) poses ``[x, y, z, yaw]``.

    Parameters
    ----------
    p_d, lambda_fp, volume : association model (detection probability,
        clutter density per m^3, surveillance volume in m^3)
    gate_probability : gate significance level; ``gating=False`` admits all
    alpha, beta, kappa : unscented transform scaling (``kappa=None`` -> 3 - n)
    sigma_v, sigma_omega, sigma_drift_p, sigma_drift_psi : process noise
    sigma_odom_t, sigma_odom_psi : odometry noise
    prior_sigma_p, prior_sigma_psi : spread of the unknown frame offsets
    max_hypotheses : cap on hypotheses per station update (None: no cap)
    clutter_exponent, likelihood : see :class:`~mutualloc.cpdaf.CpdafParams`
    bootstrap : ``"register"`` locates robots with unknown frames by
        registering their views against robot 0's before handing them to the
        association filter; ``None`` filters from the broad prior directly
    bootstrap_sigma_p, bootstrap_sigma_psi : spread assigned to a registered
        frame offset
    """

    def __init__(self, p_d=0.9, lambda_fp=1.0 / SPHERE_10M, volume=SPHERE_10M,
                 gate_probability=0.99, gating=True, alpha=1.0, beta=2.0, kappa=None,
                 sigma_v=0.05, sigma_omega=0.01, sigma_drift_p=1e-4, sigma_drift_psi=1e-5,
                 sigma_odom_t=0.01, sigma_odom_psi=0.002, prior_sigma_p=5.0,
                 prior_sigma_psi=np.pi, max_hypotheses=10_000,
                 clutter_exponent="measurements", likelihood="gaussian",
                 bootstrap="register", bootstrap_sigma_p=0.5, bootstrap_sigma_psi=0.15):
        self.p_d = p_d
        self.lambda_fp = lambda_fp
        self.volume = volume
        self.gate_probability = gate_probability
        self.gating = gating
        self.alpha = alpha
        self.beta = beta
        self.kappa = kappa
        self.sigma_v = sigma_v
        self.sigma_omega = sigma_omega
        self.sigma_drift_p = sigma_drift_p
        self.sigma_drift_psi = sigma_drift_psi
        self.sigma_odom_t = sigma_odom_t
        self.sigma_odom_psi = sigma_odom_psi
        self.prior_sigma_p = prior_sigma_p
        self.prior_sigma_psi = prior_sigma_psi
        self.max_hypotheses = max_hypotheses
        self.clutter_exponent = clutter_exponent
        self.likelihood = likelihood
        self.bootstrap = bootstrap
        self.bootstrap_sigma_p = bootstrap_sigma_p
        self.bootstrap_sigma_psi = bootstrap_sigma_psi

    def _build(self):
        check_probability(self.gate_probability, "gate_probability")
        if self.gate_probability == 0:
            raise ValueError("gate_probability must be in (0,1]")
        check_positive(self.prior_sigma_p, "prior_sigma_p")
        check_positive(self.prior_sigma_psi, "prior_sigma_psi")
        if self.bootstrap not in (None, "register"):
            raise ValueError(f"bootstrap must be None or 'register', got {self.bootstrap!r}")
        check_positive(self.bootstrap_sigma_p, "bootstrap_sigma_p")
        check_positive(self.bootstrap_sigma_psi, "bootstrap_sigma_psi")
        self.cpdaf_params_ = CpdafParams(self.p_d, self.lambda_fp, self.volume,
                                         self.clutter_exponent, self.likelihood)
        self.gate_params_ = GateParams(self.gate_probability, 3, self.gating)
        self.ut_params_ = UtParams(self.alpha, self.beta, self.kappa)
        self.process_noise_ = ProcessNoiseConfig(self.sigma_v, self.sigma_omega,
                                                 self.sigma_drift_p, self.sigma_drift_psi)
        self.odom_noise_ = OdomNoise(self.sigma_odom_t, self.sigma_odom_psi)

    def initialize(self, odometry, frame_prior=None):
        """Start a new track.

        Parameters
        ----------
        odometry : list of OdomMeasurement, one per robot
        frame_prior : (N, 4) array, optional
            Prior mean of each robot's frame offset; zeros when unknown.
        """
        self._build()
        local = np.array([z.as_array() for z in sorted(odometry, key=lambda z: z.robot_id)])
        if local.shape[0] < 1 or sorted(z.robot_id for z in odometry) != list(range(len(local))):
            raise ValueError("initial odometry must cover robots 0..N-1 exactly once")
        if frame_prior is not None:
            frame_prior = check_array(frame_prior, (len(local), 4), "frame_prior")
        self.state_ = initial_state(local, self.sigma_odom_t, self.sigma_odom_psi,
                                    frame_prior, self.prior_sigma_p, self.prior_sigma_psi)
        self.n_robots_ = len(local)
        unknown = set(range(1, len(local))) if frame_prior is None else set()
        self.unregistered_ = unknown if self.bootstrap == "register" else set()
        self.reports_ = []
        self.n_steps_ = 0
        return self

    def fit(self, frames, y=None, frame_prior=None):
        frames = list(frames)
        if not frames or frames[0].odometry is None:
            raise ValueError("the first frame must carry odometry for every robot")
        self.initialize(frames[0].odometry, frame_prior)
        for f in frames[1:]:
            self.partial_fit(f)
        return self

    def partial_fit(self, frame):
        check_is_fitted(self, "state_")
        check_frame(frame, self.n_robots_)
        state = predict(self.state_, frame.controls, frame.dt, self.process_noise_)
        if frame.odometry:
            state = odom_update_all(state, frame.odometry, self.odom_noise_, self.ut_params_)
        reports = []
        if frame.detections is not None and self.unregistered_:
            for reg in register(state, frame.detections, sorted(self.unregistered_)):
                state = apply_registration(state, reg, self.bootstrap_sigma_p,
                                           self.bootstrap_sigma_psi)
                self.unregistered_.discard(reg.robot)
        if frame.detections is not None:
            state, reports = station_sweep(state, frame.detections, self.cpdaf_params_,
                                           self.gate_params_, self.ut_params_,
                                           max_hypotheses=self.max_hypotheses)
        self.state_ = state
        self.reports_ = reports
        self.n_steps_ += 1
        return self

    def predict(self, X=None):
        """Current pose estimates in the common frame, shape (N, 4)."""
        check_is_fitted(self, "state_")
        return self.state_.poses()

    def transform(self, frames):
        """Filter ``frames`` and return the pose estimate after each, (T, N, 4)."""
        out = []
        for f in frames:
            self.partial_fit(f)
            out.append(self.predict())
        return np.array(out)
