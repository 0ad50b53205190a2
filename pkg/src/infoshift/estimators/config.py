"""Shared training configuration for the neural estimators."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError

__all__ = ["EstimatorConfig"]


@dataclass(frozen=True)
class EstimatorConfig:
    """Hyperparameters for estimator training runs.

    Defaults match the reference calibration setting; individual call
    sites (notably the pairwise critics, whose per-iteration cost scales
    with batch squared) typically override ``batch`` and ``hidden``.
    """

    hidden: int = 250
    lr: float = 0.001
    batch: int = 1024
    iterations: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.hidden <= 0 or self.batch <= 0:
            raise ConfigError("hidden and batch must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if not (self.lr > 0):
            raise ConfigError("lr must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
