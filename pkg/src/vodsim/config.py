"""Simulation configuration: defaults, validation, JSON round-trip.

Config files are JSON objects with up to four sections (workload, disk,
cache, sim); every key is optional and unknown keys are rejected by name.
An empty object runs the documented defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cache import CacheConfig
from .disk import DiskParams
from .workload import ConfigError, WorkloadConfig

POLICY_NAMES = ("deterministic", "statistical", "pic", "prefix-pic-multicast")


@dataclass(frozen=True)
class SimConfig:
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    disk: DiskParams = field(default_factory=DiskParams)
    cache: CacheConfig = field(default_factory=CacheConfig)
    policy: str = "prefix-pic-multicast"
    seed: int = 1
    duration_s: float = 7200.0
    warmup_s: float = 600.0
    network_bandwidth_bps: float = 150_000_000.0
    statistical_window: int = 200
    statistical_epsilon: float = 0.01

    def validate(self) -> None:
        self.workload.validate()
        self.disk.validate()
        self.cache.validate()
        if self.policy not in POLICY_NAMES:
            raise ConfigError(
                f"unknown policy {self.policy!r}; expected one of {POLICY_NAMES}"
            )
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be > 0")
        if not 0 <= self.warmup_s < self.duration_s:
            raise ConfigError("warmup_s must be in [0, duration_s)")
        if self.network_bandwidth_bps <= 0:
            raise ConfigError("network_bandwidth_bps must be > 0")
        if self.statistical_window < 1:
            raise ConfigError("statistical_window must be >= 1")
        if not 0.0 < self.statistical_epsilon < 1.0:
            raise ConfigError("statistical_epsilon must be in (0, 1)")
        # The engine advances in fixed 1 s rounds; one block per round must
        # equal one second of playback.
        round_s = self.disk.frames_per_block / self.workload.playback_fps
        if abs(round_s - 1.0) > 1e-9:
            raise ConfigError(
                "frames_per_block / playback_fps must equal the 1 s round"
            )


_SECTIONS = {
    "workload": WorkloadConfig,
    "disk": DiskParams,
    "cache": CacheConfig,
}
_TOP_KEYS = (
    "policy",
    "seed",
    "duration_s",
    "warmup_s",
    "network_bandwidth_bps",
    "statistical_window",
    "statistical_epsilon",
)


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}")
    return cls(**data)


def config_from_dict(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key} must be an object")
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        elif key in _TOP_KEYS:
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown key {key}")
    cfg = SimConfig(**kwargs)
    cfg.validate()
    return cfg


def config_to_dict(cfg: SimConfig) -> dict:
    out = {
        "workload": dataclasses.asdict(cfg.workload),
        "disk": dataclasses.asdict(cfg.disk),
        "cache": dataclasses.asdict(cfg.cache),
    }
    for key in _TOP_KEYS:
        out[key] = getattr(cfg, key)
    return out


def load_config(path: str | Path) -> SimConfig:
    text = Path(path).read_text()
    if not text.strip():
        data = {}
    else:
        data = json.loads(text)
    return config_from_dict(data)


def apply_override(data: dict, dotted_key: str, value) -> dict:
    """Set a possibly nested key ("workload.zipf_theta") in a config dict."""
    parts = dotted_key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override through non-object key {part}")
    node[parts[-1]] = value
    return data


def with_policy(cfg: SimConfig, policy: str) -> SimConfig:
    out = dataclasses.replace(cfg, policy=policy)
    out.validate()
    return out


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return dataclasses.replace(cfg, seed=seed)
