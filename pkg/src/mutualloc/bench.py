"""Timing of the association update with and without gating."""
import copy
import statistics
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .association import count_hypotheses
from .config import ScenarioConfig
from .simulator import FormationSpec, make_estimator, run_scenario

BENCH_COLUMNS = ("n_robots", "t_with_us", "t_without_us", "speedup", "mean_hyps_with",
                 "mean_hyps_without", "max_hyps_with", "max_hyps_without", "skipped")


@dataclass
class BenchResult:
    """Median per-station update time (microseconds) in both modes.

    ``skipped`` marks sizes whose ungated hypothesis count would exceed the
    cap; their ungated fields are NaN.
    """

    n_robots: int
    t_with_us: float
    t_without_us: float
    speedup: float
    mean_hyps_with: float
    mean_hyps_without: float
    max_hyps_with: int
    max_hyps_without: int
    skipped: bool = False

    def row(self):
        return tuple(getattr(self, c) for c in BENCH_COLUMNS)


def bench_config(n_robots, steps, seed, warmup=5):
    """Robots holding a 1.35 m circle, frames unknown to the filter."""
    duration = (steps + warmup) * 0.1
    return ScenarioConfig(n_robots=n_robots, seed=seed, dt=0.1, duration=duration,
                          formations=[FormationSpec("circle", 1.35, duration=duration,
                                                    transition=min(8.0, duration))])


def _replay(cfg, frames, gating, warmup):
    est = make_estimator(replace(cfg, enable_gating=gating))
    est.set_params(max_hypotheses=None)
    est.initialize(frames[0])
    times, hyps = [], []
    for k, frame in enumerate(frames[1:]):
        est.partial_fit(frame)
        if k < warmup or not est.reports_:
            continue
        times.append(statistics.fmean(r.wall_time_us for r in est.reports_))
        hyps.extend(r.n_hypotheses for r in est.reports_)
    return statistics.median(times), hyps, est


def run_bench(n_robots_list=(3, 5, 7), steps=20, seed=0, cap=10 ** 6, warmup=5):
    """Time the station update with and without gating for each team size.

    Both modes filter the same simulated measurements; only the gate
    differs. The first ``warmup`` steps are discarded.

    Returns
    -------
    list of BenchResult
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    out = []
    with threadpool_limits(limits=1):
        for n in n_robots_list:
            if n < 2:
                raise ValueError("n_robots must be >= 2")
            cfg = bench_config(n, steps, seed, warmup)
            frames = []
            run_scenario(cfg, record_frames=frames)
            t_with, h_with, _ = _replay(cfg, frames, True, warmup)
            worst = max((count_hypotheses(n - 1, len(d)) for f in frames[1:]
                         if f.detections for d in f.detections), default=1)
            if worst > cap:
                out.append(BenchResult(n, t_with, float("nan"), float("nan"),
                                       float(np.mean(h_with)), float("nan"),
                                       int(max(h_with)), -1, skipped=True))
                continue
            t_without, h_without, _ = _replay(cfg, frames, False, warmup)
            out.append(BenchResult(n, t_with, t_without, t_without / t_with,
                                   float(np.mean(h_with)), float(np.mean(h_without)),
                                   int(max(h_with)), int(max(h_without))))
    return out


def gate_sanity_difference(n_robots=3, steps=10, seed=0):
    """Largest posterior difference between the gated code path with an
    infinite threshold (``p_g = 1``) and no gate at all, over a short run."""
    cfg = bench_config(n_robots, steps, seed, warmup=0)
    cfg = replace(cfg, gate=replace(cfg.gate, p_g=1.0))
    frames = []
    run_scenario(cfg, record_frames=frames)
    a = make_estimator(cfg)
    b = make_estimator(replace(cfg, enable_gating=False))
    a.initialize(frames[0])
    b.initialize(frames[0])
    diff = 0.0
    for frame in frames[1:]:
        a.partial_fit(frame)
        b.partial_fit(copy.deepcopy(frame))
        if any(r.n_gated_pairs != r.n_measurements * r.n_targets for r in a.reports_):
            raise RuntimeError("the wide gate rejected a pair; sanity check not applicable")
        diff = max(diff, float(np.max(np.abs(a.state_.x - b.state_.x))),
                   float(np.max(np.abs(a.state_.P - b.state_.P))))
    return diff
