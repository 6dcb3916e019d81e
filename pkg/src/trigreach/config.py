"""Pipeline configuration and run manifests."""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional

from . import __version__
from . import ringsim as rs
from .sysmodel import InputBounds, StateBounds
from .trigger import TriggerSpec


class ConfigError(ValueError):
    """Invalid pipeline configuration; the message names the offending key."""


@dataclass
class SimulateOptions:
    horizon: float = 60.0
    backdoor: bool = True
    #: Scripted adversary: ``{"start": s, "accel": m/s^2, "duration": s}`` or None.
    adversary: Optional[dict] = None
    #: Start from ``(x1, x2, x3)`` embedded on the ring instead of the uniform fleet.
    initial: Optional[List[float]] = None


@dataclass
class PipelineConfig:
    seed: int
    ring: rs.RingConfig = field(default_factory=rs.RingConfig)
    idm: rs.IDMParams = field(default_factory=rs.IDMParams)
    av: rs.AVParams = field(default_factory=rs.AVParams)
    backdoor: TriggerSpec = field(default_factory=TriggerSpec)
    state_bounds: StateBounds = field(default_factory=StateBounds)
    input_bounds: InputBounds = field(default_factory=InputBounds)
    degree: int = 3
    gamma: Optional[float] = 0.999
    n_samples: int = 10_000
    test_fraction: float = 0.5
    episode_steps: int = 100
    horizons: List[float] = field(default_factory=lambda: [0.5, 1.0, 5.0, 10.0])
    grid_res: int = 61
    within_horizon: bool = False
    activation_samples: int = 200
    follow_through: Optional[float] = -1.0
    check_thresholds: bool = False
    min_activation_rate: float = 0.9
    terminal_tolerance: float = 0.5
    verify_seeds: int = 10
    simulate: SimulateOptions = field(default_factory=SimulateOptions)

    def backdoor_config(self, enabled=True):
        return rs.BackdoorConfig(self.backdoor, enabled)

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_NESTED = {
    "ring": rs.RingConfig, "idm": rs.IDMParams, "av": rs.AVParams, "backdoor": TriggerSpec,
    "state_bounds": StateBounds, "input_bounds": InputBounds, "simulate": SimulateOptions,
}


def _build(cls, doc, prefix):
    if not isinstance(doc, dict):
        raise ConfigError(f"{prefix}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in names:
            raise ConfigError(f"{prefix}.{key}: unknown key")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}: {exc}") from None


def config_from_dict(doc) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "seed" not in doc:
        raise ConfigError("seed: required (no implicit entropy)")
    kwargs = {}
    top = {f.name for f in dataclasses.fields(PipelineConfig)}
    for key, value in doc.items():
        if key not in top:
            raise ConfigError(f"{key}: unknown key")
        kwargs[key] = _build(_NESTED[key], value, key) if key in _NESTED else value
    cfg = PipelineConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig):
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed: must be an unsigned 64-bit integer")
    if not isinstance(cfg.degree, int) or cfg.degree < 1 or cfg.degree % 2 == 0:
        raise ConfigError(f"degree: must be a positive odd integer, got {cfg.degree!r}")
    if cfg.gamma is not None and not 0 < cfg.gamma < 1:
        raise ConfigError(f"gamma: must be in (0, 1) or null, got {cfg.gamma!r}")
    if not cfg.horizons or any(not isinstance(h, (int, float)) or h <= 0 for h in cfg.horizons):
        raise ConfigError("horizons: must be a nonempty list of positive numbers")
    for key in ("n_samples", "grid_res", "activation_samples", "episode_steps", "verify_seeds"):
        v = getattr(cfg, key)
        if not isinstance(v, int) or v < 1:
            raise ConfigError(f"{key}: must be a positive integer, got {v!r}")
    if cfg.grid_res < 3:
        raise ConfigError("grid_res: need at least 3 nodes per axis")
    if not 0 < cfg.test_fraction < 1:
        raise ConfigError("test_fraction: must be in (0, 1)")
    if cfg.simulate.horizon <= 0:
        raise ConfigError("simulate.horizon: must be positive")
    adv = cfg.simulate.adversary
    if adv is not None:
        if not isinstance(adv, dict) or set(adv) - {"start", "accel", "duration"}:
            raise ConfigError("simulate.adversary: expected keys start, accel, duration")
    init = cfg.simulate.initial
    if init is not None:
        if not isinstance(init, (list, tuple)) or len(init) != 3:
            raise ConfigError("simulate.initial: expected [x1, x2, x3]")
        if not rs.is_realizable(init, cfg.ring, cfg.idm):
            raise ConfigError(f"simulate.initial: {init} cannot be placed on the ring")


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return config_from_dict(doc)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str = __version__
    started: str = ""
    finished: str = ""
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    FILENAME = "manifest.json"

    @staticmethod
    def now():
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def record(self, kind, path, root):
        getattr(self, kind)[os.path.relpath(path, root)] = sha256_file(path)

    def write(self, out_dir):
        path = os.path.join(out_dir, self.FILENAME)
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=1, sort_keys=True)
            fh.write("\n")
        return path

    @classmethod
    def load(cls, out_dir):
        with open(os.path.join(out_dir, cls.FILENAME)) as fh:
            return cls(**json.load(fh))


def check_manifest(out_dir):
    """Mismatched or missing files listed in the manifest of ``out_dir``."""
    m = RunManifest.load(out_dir)
    bad = []
    for rel, digest in m.outputs.items():
        path = os.path.join(out_dir, rel)
        if not os.path.exists(path):
            bad.append(f"{rel}: missing")
        elif sha256_file(path) != digest:
            bad.append(f"{rel}: digest mismatch")
    for rel, digest in m.inputs.items():
        path = os.path.join(out_dir, rel)
        if os.path.exists(path) and sha256_file(path) != digest:
            bad.append(f"{rel}: input changed since the run")
    return bad
