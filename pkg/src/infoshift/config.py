"""Declarative run configuration.

One TOML document drives every pipeline; the loader validates types and
rejects unknown keys so a config file is a complete, hashable statement
of a run. The hash of the canonical form keys the manifest, letting
reruns prove they executed the same experiment.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from .errors import ConfigError
from .estimators import EstimatorConfig

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = [
    "ScenarioSpec",
    "ModelSpec",
    "CheckSpec",
    "CalibrationSpec",
    "RunConfig",
    "load_config",
    "config_from_dict",
]

_KINDS = ("joint", "visual", "text", "conditional")
_MODEL_TYPES = ("true-conditional", "uniform", "tuned", "perturbed")


@dataclass(frozen=True)
class ScenarioSpec:
    """Shift-scenario generation plan."""

    kinds: tuple = _KINDS
    nv: int = 4
    nt: int = 4
    ny: int = 4
    levels: int = 5
    ladders: int = 2
    blocks: int = 2
    instances: int = 1000
    max_alphabet: int = 6

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        for k in self.kinds:
            if k not in _KINDS:
                raise ConfigError(f"unknown scenario kind {k!r}; choose from {_KINDS}")
        if not self.kinds:
            raise ConfigError("scenarios.kinds must be non-empty")
        for name in ("nv", "nt", "ny", "blocks"):
            if getattr(self, name) < 2:
                raise ConfigError(f"scenarios.{name} must be >= 2")
        # severity ladders need at least two rungs to order anything
        if self.levels < 2:
            raise ConfigError("scenarios.levels must be >= 2")
        for name in ("ladders", "instances"):
            if getattr(self, name) < 1:
                raise ConfigError(f"scenarios.{name} must be >= 1")
        if self.max_alphabet < 2:
            raise ConfigError("scenarios.max_alphabet must be >= 2")


@dataclass(frozen=True)
class ModelSpec:
    """How the evaluated conditional model is produced per scenario."""

    type: str = "perturbed"
    noise: float = 0.3
    steps: int = 5000
    lr: float = 0.5

    def __post_init__(self):
        if self.type not in _MODEL_TYPES:
            raise ConfigError(f"unknown model.type {self.type!r}; choose from {_MODEL_TYPES}")
        if self.noise < 0:
            raise ConfigError("model.noise must be >= 0")
        if self.steps < 0:
            raise ConfigError("model.steps must be >= 0")
        if not (self.lr > 0):
            raise ConfigError("model.lr must be positive")


@dataclass(frozen=True)
class CheckSpec:
    """Tolerances used by the verification and calibration gates."""

    slack: float = 1e-9
    identity_tol: float = 1e-10
    club_mae: float = 0.12
    independence_tol: float = 0.05

    def __post_init__(self):
        # slack may be deliberately negative to force the failure path
        for name in ("identity_tol", "club_mae", "independence_tol"):
            if not (getattr(self, name) > 0):
                raise ConfigError(f"checks.{name} must be positive")


@dataclass(frozen=True)
class CalibrationSpec:
    """Estimator calibration workload."""

    rhos: tuple = (0.3, 0.6, 0.9)
    seeds: int = 5
    eval_n: int = 10000
    eval_on_train: bool = False
    discrete_n: int = 100000
    critic_hidden: int = 64
    critic_batch: int = 256
    critic_iterations: int = 1200

    def __post_init__(self):
        object.__setattr__(self, "rhos", tuple(float(r) for r in self.rhos))
        for r in self.rhos:
            if not (0 <= r < 1):
                raise ConfigError(f"calibration.rhos entries must lie in [0, 1), got {r}")
        if not self.rhos:
            raise ConfigError("calibration.rhos must be non-empty")
        for name in ("seeds", "eval_n", "discrete_n", "critic_hidden", "critic_batch"):
            if getattr(self, name) < 1:
                raise ConfigError(f"calibration.{name} must be >= 1")
        if self.critic_iterations < 0:
            raise ConfigError("calibration.critic_iterations must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str = "runs/out"
    scenarios: ScenarioSpec = field(default_factory=ScenarioSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    checks: CheckSpec = field(default_factory=CheckSpec)
    calibration: CalibrationSpec = field(default_factory=CalibrationSpec)

    def __post_init__(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    def canonical_dict(self) -> dict:
        d = asdict(self)
        d["scenarios"]["kinds"] = list(self.scenarios.kinds)
        d["calibration"]["rhos"] = list(self.calibration.rhos)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def replace(self, **kwargs) -> "RunConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kwargs)
        return RunConfig(**d)


def _build(cls, section: str, data: dict) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"section [{section}] must be a table")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
        )
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad [{section}] section: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    sections = {
        "scenarios": ScenarioSpec,
        "model": ModelSpec,
        "estimator": EstimatorConfig,
        "checks": CheckSpec,
        "calibration": CalibrationSpec,
    }
    top_allowed = {"seed", "out"} | set(sections)
    unknown = set(data) - top_allowed
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    kwargs: dict[str, Any] = {}
    for key in ("seed", "out"):
        if key in data:
            kwargs[key] = data[key]
    for key, cls in sections.items():
        if key in data:
            kwargs[key] = _build(cls, key, data[key])
    return RunConfig(**kwargs)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return config_from_dict(data)
