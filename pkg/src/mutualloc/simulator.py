"""Seeded multi-robot world: ground truth, formations, sensors and the
dead-reckoning baseline."""
import time
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detection import (BearingDistance, Detection, bearing_distance_to_cartesian,
                        tangent_basis)
from . import __version__
from .estimator import Frame, MutualLocalizer
from .geom import rz_apply, wrap_angle
from .metrics import absolute_error, relative_error
from .odometry import OdomMeasurement

FORMATION_KINDS = ("circle", "line", "vline")


@dataclass
class SensorConfig:
    """Simulated sensor models.

    Odometry noise ``sigma_o_t``/``sigma_o_psi``; bearing noise ``sigma_b``;
    range noise ``sigma_d_slope * d + sigma_d_offset``; detection
    probability ``p_d``; clutter density ``lambda_fp`` over a sphere of radius
    ``clutter_radius`` around the observer. ``sigma_u``/``sigma_omega_u``
    corrupt the velocity input handed to the filter; ``drift_p`` and
    ``drift_psi`` random-walk every non-reference odometry frame (m/sqrt(s),
    rad/sqrt(s)).
    """

    sigma_o_t: float = 0.01
    sigma_o_psi: float = 0.002
    sigma_b: float = 0.008
    sigma_d_slope: float = 0.0495
    sigma_d_offset: float = 0.0336
    p_d: float = 0.9
    lambda_fp: float = 1.0 / (4.0 / 3.0 * np.pi * 10.0 ** 3)
    clutter_radius: float = 10.0
    detection_rate: float = 10.0
    odometry_rate: float = 10.0
    sigma_u: float = 0.02
    sigma_omega_u: float = 0.005
    drift_p: float = 0.0
    drift_psi: float = 0.0

    def __post_init__(self):
        for name in ("clutter_radius", "detection_rate", "odometry_rate"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be > 0" % name)
        # zero noise is allowed so that noise-free worlds can be simulated
        for name in ("sigma_o_t", "sigma_o_psi", "sigma_b", "sigma_d_slope",
                     "sigma_d_offset", "lambda_fp", "sigma_u", "sigma_omega_u",
                     "drift_p", "drift_psi"):
            if not getattr(self, name) >= 0:
                raise ValueError("%s must be >= 0" % name)
        if not 0 <= self.p_d <= 1:
            raise ValueError("p_d must be in [0,1]")

    @property
    def volume(self):
        return 4.0 / 3.0 * np.pi * self.clutter_radius ** 3

    def sigma_d(self, d):
        return self.sigma_d_slope * np.asarray(d) + self.sigma_d_offset


@dataclass
class FormationSpec:
    """A target configuration held for ``duration`` seconds, reached by a
    smooth ``transition``-second trajectory. ``size`` is the circle radius or
    the line length."""

    kind: str = "circle"
    size: float = 1.35
    center: tuple = (0.0, 0.0, 1.5)
    heading: float = 0.0
    duration: float = 15.0
    transition: float = 8.0

    def __post_init__(self):
        if self.kind not in FORMATION_KINDS:
            raise ValueError("formation kind must be one of %s" % (FORMATION_KINDS,))
        if not self.size > 0:
            raise ValueError("formation size must be > 0")
        if not 0 < self.transition <= self.duration:
            raise ValueError("transition must be in (0, duration]")
        self.center = tuple(float(c) for c in self.center)
        if len(self.center) != 3:
            raise ValueError("center must have 3 components")


@dataclass
class GroundTruth:
    """True poses in the common frame and true odometry-frame offsets."""

    pos: np.ndarray        # (N, 3)
    psi: np.ndarray        # (N,)
    frame: np.ndarray      # (N, 4) [t, yaw] of each f_i

    def copy(self):
        return GroundTruth(self.pos.copy(), self.psi.copy(), self.frame.copy())

    @property
    def n_robots(self):
        return self.pos.shape[0]

    def poses(self):
        return np.column_stack([self.pos, self.psi])

    def local_poses(self):
        """Each robot's pose in its own odometry frame (noise free)."""
        t = rz_apply(-self.frame[:, 3], self.pos - self.frame[:, :3])
        return np.column_stack([t, wrap_angle(self.psi - self.frame[:, 3])])


def formation_waypoints(spec, n_robots):
    """Slot positions (N, 3) of a formation; slot i belongs to robot i."""
    if n_robots < 2:
        raise ValueError("a formation needs at least 2 robots")
    c = np.asarray(spec.center, dtype=float)
    h = spec.heading
    if spec.kind == "circle":
        ang = h + 2.0 * np.pi * np.arange(n_robots) / n_robots
        off = np.column_stack([np.cos(ang), np.sin(ang), np.zeros(n_robots)]) * spec.size
    elif spec.kind == "line":
        s = np.linspace(-spec.size / 2.0, spec.size / 2.0, n_robots)
        off = np.column_stack([s * np.cos(h), s * np.sin(h), np.zeros(n_robots)])
    else:
        # apex at the center, remaining robots alternate between two legs
        n_leg = n_robots - 1
        per_leg = (n_leg + 1) // 2
        spacing = spec.size / 2.0 / per_leg
        off = np.zeros((n_robots, 3))
        for k in range(n_leg):
            side = 1 if k % 2 == 0 else -1
            dist = spacing * (k // 2 + 1)
            a = h + np.pi + side * np.pi / 4.0
            off[k + 1] = dist * np.cos(a), dist * np.sin(a), 0.0
    return c + off


def quintic(p0, p1, T, t):
    """Rest-to-rest quintic from ``p0`` to ``p1`` over ``T`` seconds.

    Returns position and velocity at time ``t`` (clamped to [0, T]).
    """
    tau = min(max(t / T, 0.0), 1.0)
    s = 10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5
    ds = (30 * tau ** 2 - 60 * tau ** 3 + 30 * tau ** 4) / T if 0 < tau < 1 else 0.0
    d = np.asarray(p1) - np.asarray(p0)
    return np.asarray(p0) + s * d, ds * d


def step_truth(gt, cmd, dt, rng=None, drift_p=0.0, drift_psi=0.0):
    """Integrate commanded common-frame velocities ``cmd`` (N, 4) exactly.

    Optional frame drift random-walks every non-reference odometry frame.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    cmd = np.asarray(cmd, dtype=float)
    out = gt.copy()
    out.pos += cmd[:, :3] * dt
    out.psi = wrap_angle(out.psi + cmd[:, 3] * dt)
    if rng is not None and (drift_p > 0 or drift_psi > 0):
        n = gt.n_robots
        out.frame[1:, :3] += rng.normal(0.0, drift_p * np.sqrt(dt), (n - 1, 3))
        out.frame[1:, 3] = wrap_angle(out.frame[1:, 3]
                                      + rng.normal(0.0, drift_psi * np.sqrt(dt), n - 1))
    return out


def gen_odometry(gt, cfg, rng):
    """Noisy pose of every robot in its own odometry frame."""
    local = gt.local_poses()
    n = gt.n_robots
    t = local[:, :3] + rng.normal(0.0, cfg.sigma_o_t, (n, 3))
    psi = local[:, 3] + rng.normal(0.0, cfg.sigma_o_psi, n)
    return [OdomMeasurement(i, t[i], psi[i]) for i in range(n)]


def perturb_bearing(u, sigma_b, rng):
    """Rotate unit vector ``u`` by independent N(0, sigma_b^2) angles about
    the two axes orthogonal to it."""
    e1, e2 = tangent_basis(u)
    a = rng.normal(0.0, sigma_b, 2)
    v = a[0] * e1 + a[1] * e2
    th = np.linalg.norm(v)
    if th == 0:
        return u.copy()
    return np.cos(th) * u + np.sin(th) * v / th


def gen_detections(gt, cfg, rng, model=None):
    """Anonymous detections for every observer, shuffled.

    Each other robot is detected with probability ``p_d`` through the noisy
    bearing/range model; Poisson clutter is added uniformly inside the
    clutter sphere. The covariance attached to each detection comes from
    ``model`` (the filter's noise model), defaulting to ``cfg``.
    """
    model = cfg if model is None else model
    n = gt.n_robots
    out: List[List[Detection]] = []
    mean_clutter = cfg.lambda_fp * cfg.volume
    for i in range(n):
        dets = []
        for j in range(n):
            if j == i or rng.random() >= cfg.p_d:
                continue
            rel = rz_apply(-gt.psi[i], gt.pos[j] - gt.pos[i])
            d_true = float(np.linalg.norm(rel))
            if d_true == 0:
                continue
            u = perturb_bearing(rel / d_true, cfg.sigma_b, rng)
            d = d_true + rng.normal(0.0, float(cfg.sigma_d(d_true)))
            if d <= 0:
                d = 1e-3
            p, R = bearing_distance_to_cartesian(BearingDistance(u, d), model.sigma_b,
                                                 model.sigma_d)
            dets.append(Detection(i, p, R))
        for _ in range(rng.poisson(mean_clutter)):
            v = rng.normal(size=3)
            u = v / np.linalg.norm(v)
            d = cfg.clutter_radius * rng.random() ** (1.0 / 3.0)
            d = max(d, 1e-3)
            p, R = bearing_distance_to_cartesian(BearingDistance(u, d), model.sigma_b,
                                                 model.sigma_d)
            dets.append(Detection(i, p, R))
        order = rng.permutation(len(dets))
        out.append([dets[k] for k in order])
    return out


def odometry_increment(prev, cur):
    """Body-frame motion between two odometry poses (N, 4) -> (N, 4)."""
    prev = np.asarray(prev, dtype=float)
    cur = np.asarray(cur, dtype=float)
    d = np.empty_like(cur)
    d[:, :3] = rz_apply(-prev[:, 3], cur[:, :3] - prev[:, :3])
    d[:, 3] = wrap_angle(cur[:, 3] - prev[:, 3])
    return d


def naive_baseline_step(est, increments):
    """Dead-reckon common-frame poses (N, 4) by composing odometry
    increments; no detections are used."""
    est = np.asarray(est, dtype=float)
    out = np.empty_like(est)
    out[:, :3] = est[:, :3] + rz_apply(est[:, 3], increments[:, :3])
    out[:, 3] = wrap_angle(est[:, 3] + increments[:, 3])
    return out


def formation_controller(est_pos, ref_pos, ref_vel=None, gain=1.0, v_max=1.0):
    """Velocity command: feedforward plus proportional correction toward the
    reference, saturated to ``v_max`` in norm per robot."""
    est_pos = np.asarray(est_pos, dtype=float)
    cmd = gain * (np.asarray(ref_pos, dtype=float) - est_pos)
    if ref_vel is not None:
        cmd = cmd + ref_vel
    norm = np.linalg.norm(cmd, axis=-1, keepdims=True)
    scale = np.where(norm > v_max, v_max / np.maximum(norm, 1e-300), 1.0)
    return cmd * scale


def spawn(n_robots, rng, box=5.0, min_separation=0.8, max_tries=10_000):
    """Random odometry-frame offsets; robots start at their frame origins.

    Robot 0 defines the common frame and sits at the origin.
    """
    frame = np.zeros((n_robots, 4))
    for i in range(1, n_robots):
        for _ in range(max_tries):
            t = np.array([rng.uniform(-box, box), rng.uniform(-box, box), 0.0])
            if np.all(np.linalg.norm(frame[:i, :3] - t, axis=1) >= min_separation):
                break
        else:
            raise RuntimeError("could not place robot %d" % i)
        frame[i, :3] = t
        frame[i, 3] = wrap_angle(rng.uniform(-np.pi, np.pi))
    return GroundTruth(frame[:, :3].copy(), frame[:, 3].copy(), frame)


@dataclass
class RunLog:
    """Per-step record of one scenario run.

    Row 0 is the initial belief before any update; rows 1..n follow each
    filter step. Arrays are indexed ``[row, robot, (x, y, z, yaw)]``.
    """

    header: dict
    time: np.ndarray
    truth: np.ndarray
    estimate: np.ndarray
    baseline: np.ndarray
    n_hypotheses: np.ndarray
    update_us: np.ndarray

    @property
    def n_rows(self):
        return self.time.shape[0]


def _steps_per(rate, dt):
    return max(1, int(round(1.0 / (rate * dt))))


def _schedule(formations, start):
    """Formation segments as (t_start, from_slots, to_slots, transition).

    Slots are assigned to robots by minimum total squared travel."""
    segs, t0, prev = [], 0.0, np.asarray(start, dtype=float)
    for spec in formations:
        slots = formation_waypoints(spec, prev.shape[0])
        cost = ((prev[:, None, :] - slots[None, :, :]) ** 2).sum(axis=-1)
        rows, cols = linear_sum_assignment(cost)
        slots = slots[cols[np.argsort(rows)]]
        segs.append((t0, prev, slots, spec.transition))
        t0 += spec.duration
        prev = slots
    return segs


def _reference(segs, t):
    seg = segs[0]
    for s in segs:
        if t >= s[0]:
            seg = s
    return quintic(seg[1], seg[2], seg[3], t - seg[0])


def make_estimator(cfg):
    """Filter configured from a :class:`~mutualloc.config.ScenarioConfig`."""
    s, f = cfg.sensor, cfg.filter

    def pick(v, default):
        return default if v is None else v

    return MutualLocalizer(
        p_d=pick(f.p_d, s.p_d), lambda_fp=pick(f.lambda_fp, s.lambda_fp),
        volume=s.volume, gate_probability=cfg.gate.p_g, gating=cfg.enable_gating,
        alpha=f.alpha, beta=f.beta, kappa=f.kappa,
        sigma_v=cfg.process_noise.sigma_v, sigma_omega=cfg.process_noise.sigma_omega,
        sigma_drift_p=cfg.process_noise.sigma_drift_p,
        sigma_drift_psi=cfg.process_noise.sigma_drift_psi,
        sigma_odom_t=pick(f.sigma_odom_t, s.sigma_o_t),
        sigma_odom_psi=pick(f.sigma_odom_psi, s.sigma_o_psi),
        prior_sigma_p=f.prior_sigma_p, prior_sigma_psi=f.prior_sigma_psi,
        max_hypotheses=f.max_hypotheses,
        clutter_exponent=cfg.paper_compat.lambda_exponent,
        likelihood=cfg.paper_compat.likelihood_sign, bootstrap=f.bootstrap)


def detection_model(cfg):
    """Sensor model the filter believes in (for detection covariances)."""
    s, f = cfg.sensor, cfg.filter
    kw = {k: getattr(f, k) for k in ("sigma_b", "sigma_d_slope", "sigma_d_offset")
          if getattr(f, k) is not None}
    return replace(s, **kw)


def run_scenario(cfg, estimator=None, record_frames=None):
    """Simulate one scenario end to end.

    Robots spawn at random odometry frames unknown to the filter (unless
    ``cfg.spawn.known_frames``), follow the formation sequence and are
    tracked by the filter and by the dead-reckoning baseline.

    Parameters
    ----------
    cfg : ScenarioConfig
    estimator : MutualLocalizer, optional
        Overrides the filter built from ``cfg``.
    record_frames : list, optional
        Receives the initial odometry followed by every :class:`Frame` fed
        to the filter, for replaying the same data through other filters.

    Returns
    -------
    RunLog
    """
    wall0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    n, dt, sensor = cfg.n_robots, cfg.dt, cfg.sensor
    model = detection_model(cfg)
    est = make_estimator(cfg) if estimator is None else estimator
    gt = spawn(n, rng, cfg.spawn.box, cfg.spawn.min_separation)
    segs = _schedule(cfg.formations, gt.pos)
    k_odo = _steps_per(sensor.odometry_rate, dt)
    k_det = _steps_per(sensor.detection_rate, dt)
    ctrl = cfg.controller

    odo = gen_odometry(gt, sensor, rng)
    prior = gt.frame.copy() if cfg.spawn.known_frames else None
    est.initialize(odo, frame_prior=prior)
    if record_frames is not None:
        record_frames.append(odo)
    odo_prev = np.array([z.as_array() for z in odo])
    base = gt.poses() if cfg.enable_baseline else np.full((n, 4), np.nan)

    rows = cfg.n_steps + 1
    times = np.arange(rows) * dt
    truth = np.empty((rows, n, 4))
    estimate = np.empty((rows, n, 4))
    baseline = np.empty((rows, n, 4))
    n_hyp = np.zeros(rows, dtype=np.int64)
    update_us = np.zeros(rows)
    truth[0], estimate[0], baseline[0] = gt.poses(), est.predict(), base

    for k in range(1, rows):
        ref, vff = _reference(segs, (k - 1) * dt)
        if ctrl.mode == "scripted":
            v = formation_controller(gt.pos, ref, vff, ctrl.gain, ctrl.v_max)
            v_local = rz_apply(-gt.frame[:, 3], v)
        else:
            belief = est.predict()
            v = formation_controller(belief[:, :3], ref, vff, ctrl.gain, ctrl.v_max)
            # robots still being located hold position
            for i in getattr(est, "unregistered_", ()):
                v[i] = 0.0
            frame_yaw = est.state_.x[7::8]
            v_local = rz_apply(-frame_yaw, v)
        cmd = np.column_stack([rz_apply(gt.frame[:, 3], v_local), np.zeros(n)])
        u = np.column_stack([v_local + rng.normal(0.0, sensor.sigma_u, (n, 3)),
                             rng.normal(0.0, sensor.sigma_omega_u, n)])
        gt = step_truth(gt, cmd, dt, rng, sensor.drift_p, sensor.drift_psi)
        odo = gen_odometry(gt, sensor, rng) if k % k_odo == 0 else None
        dets = gen_detections(gt, sensor, rng, model) if k % k_det == 0 else None

        frame = Frame(dt, u, odo, dets)
        if record_frames is not None:
            record_frames.append(frame)
        if cfg.record_timing:
            t0 = time.perf_counter()
            est.partial_fit(frame)
            update_us[k] = (time.perf_counter() - t0) * 1e6
        else:
            est.partial_fit(frame)
        n_hyp[k] = sum(r.n_hypotheses for r in est.reports_)
        if odo is not None:
            cur = np.array([z.as_array() for z in odo])
            if cfg.enable_baseline:
                base = naive_baseline_step(base, odometry_increment(odo_prev, cur))
            odo_prev = cur
        truth[k], estimate[k], baseline[k] = gt.poses(), est.predict(), base

    header = {"format": "mutualloc-runlog/1", "version": __version__,
              "seed": cfg.seed, "n_robots": n, "config": cfg.to_dict(),
              "wall_time_s": (time.perf_counter() - wall0) if cfg.record_timing else None}
    return RunLog(header, times, truth, estimate, baseline, n_hyp, update_us)
