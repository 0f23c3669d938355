"""Scenario configuration: a single JSON document, strictly validated."""
import dataclasses
import difflib
import json
import os
from dataclasses import dataclass, field
from typing import List, Optional

from .simulator import FormationSpec, SensorConfig
from .state import ProcessNoiseConfig

CONTROLLER_MODES = ("scripted", "estimated")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the field."""


@dataclass
class GateConfig:
    p_g: float = 0.99

    def __post_init__(self):
        if not 0 < self.p_g <= 1:
            raise ValueError("p_g must be in (0,1]")


@dataclass
class FilterConfig:
    """Filter-side model. Every ``None`` field takes the simulated sensor's
    value; set them to model a mismatched or noise-free world."""

    p_d: Optional[float] = None
    lambda_fp: Optional[float] = None
    sigma_odom_t: Optional[float] = None
    sigma_odom_psi: Optional[float] = None
    sigma_b: Optional[float] = None
    sigma_d_slope: Optional[float] = None
    sigma_d_offset: Optional[float] = None
    max_hypotheses: Optional[int] = 10_000
    prior_sigma_p: float = 5.0
    prior_sigma_psi: float = 3.141592653589793
    bootstrap: Optional[str] = "register"
    alpha: float = 1.0
    beta: float = 2.0
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.p_d is not None and not 0 <= self.p_d <= 1:
            raise ValueError("p_d must be in [0,1]")
        if self.lambda_fp is not None and not self.lambda_fp >= 0:
            raise ValueError("lambda_fp must be >= 0")
        for name in ("sigma_odom_t", "sigma_odom_psi", "sigma_b", "sigma_d_offset"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError("%s must be > 0" % name)
        if self.sigma_d_slope is not None and not self.sigma_d_slope >= 0:
            raise ValueError("sigma_d_slope must be >= 0")
        if self.max_hypotheses is not None and self.max_hypotheses < 1:
            raise ValueError("max_hypotheses must be >= 1")
        for name in ("prior_sigma_p", "prior_sigma_psi"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be > 0" % name)
        if self.bootstrap not in (None, "register"):
            raise ValueError("bootstrap must be null or 'register'")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0,1]")


@dataclass
class PaperCompat:
    """Switches reproducing literal readings of the published weighting."""

    lambda_exponent: str = "measurements"
    likelihood_sign: str = "gaussian"

    def __post_init__(self):
        if self.lambda_exponent not in ("measurements", "targets"):
            raise ValueError("lambda_exponent must be 'measurements' or 'targets'")
        if self.likelihood_sign not in ("gaussian", "paper"):
            raise ValueError("likelihood_sign must be 'gaussian' or 'paper'")


@dataclass
class SpawnConfig:
    """Frame offsets are drawn in a ``box`` (m) square; ``known_frames``
    hands the true offsets to the filter as its prior mean."""

    box: float = 5.0
    min_separation: float = 0.8
    known_frames: bool = False

    def __post_init__(self):
        if not self.box > 0:
            raise ValueError("box must be > 0")
        if not self.min_separation >= 0:
            raise ValueError("min_separation must be >= 0")


@dataclass
class ControllerConfig:
    mode: str = "scripted"
    gain: float = 1.0
    v_max: float = 1.0

    def __post_init__(self):
        if self.mode not in CONTROLLER_MODES:
            raise ValueError("mode must be one of %s" % (CONTROLLER_MODES,))
        if not self.gain >= 0:
            raise ValueError("gain must be >= 0")
        if not self.v_max > 0:
            raise ValueError("v_max must be > 0")


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one simulated run.

    ``duration`` defaults to the sum of the formation durations.
    """

    n_robots: int = 7
    seed: int = 0
    dt: float = 0.1
    duration: Optional[float] = None
    formations: List[FormationSpec] = field(default_factory=lambda: [FormationSpec()])
    sensor: SensorConfig = field(default_factory=SensorConfig)
    process_noise: ProcessNoiseConfig = field(default_factory=ProcessNoiseConfig)
    gate: GateConfig = field(default_factory=GateConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    spawn: SpawnConfig = field(default_factory=SpawnConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    paper_compat: PaperCompat = field(default_factory=PaperCompat)
    enable_gating: bool = True
    enable_baseline: bool = False
    convergence_threshold: float = 0.05
    record_timing: bool = False

    def __post_init__(self):
        if self.n_robots < 2:
            raise ValueError("n_robots must be >= 2")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.formations:
            raise ValueError("formations must not be empty")
        if self.duration is None:
            self.duration = float(sum(f.duration for f in self.formations))
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if not self.convergence_threshold > 0:
            raise ValueError("convergence_threshold must be > 0")

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def to_dict(self):
        return dataclasses.asdict(self)


def _check_scalar(value, tp, where):
    """Coerce a JSON scalar to the annotated type, rejecting mismatches."""
    origin = getattr(tp, "__origin__", None)
    if origin is not None and type(None) in getattr(tp, "__args__", ()):
        if value is None:
            return None
        tp = next(a for a in tp.__args__ if a is not type(None))
        origin = getattr(tp, "__origin__", None)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if tp is tuple:
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where} must be a list of numbers")
        return tuple(float(v) for v in value)
    return value


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{where}.{key}" if where else key
        if key not in fields:
            hint = difflib.get_close_matches(key, list(fields), n=1, cutoff=0.5)
            msg = f"unknown key '{path}'"
            if hint:
                msg += f"; did you mean '{hint[0]}'?"
            raise ConfigError(msg)
        tp = fields[key].type
        if dataclasses.is_dataclass(tp):
            kwargs[key] = _build(tp, value, path)
        elif key == "formations" and cls is ScenarioConfig:
            if not isinstance(value, list):
                raise ConfigError(f"{path} must be a list")
            kwargs[key] = [_build(FormationSpec, v, f"{path}[{i}]") for i, v in enumerate(value)]
        else:
            kwargs[key] = _check_scalar(value, tp, path)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where + ': ' if where else ''}{exc}") from None


def config_from_dict(data):
    """Validate a decoded JSON object into a :class:`ScenarioConfig`."""
    return _build(ScenarioConfig, data, "")


def parse_config(path, env=None):
    """Load and validate a scenario file.

    The only environment override is ``SEED``, which replaces ``seed``.

    Raises
    ------
    ConfigError
        On unreadable files, JSON syntax errors (with line and column) and
        validation failures.
    """
    env = os.environ if env is None else env
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(data, dict) and env.get("SEED") not in (None, ""):
        try:
            data = dict(data, seed=int(env["SEED"]))
        except ValueError:
            raise ConfigError("SEED must be an integer") from None
    return config_from_dict(data)
