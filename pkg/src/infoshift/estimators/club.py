"""Contrastive upper-bound mutual-information estimator.

A conditional Gaussian ``q(y|x) = N(mu(x), diag(exp(logvar(x))))`` is fit
by maximum likelihood on paired batches; the estimate is the gap between
the average log-density on aligned pairs and the average over all
cross pairs, which upper-bounds the true dependence when the fitted
conditional is close to the data conditional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConvergenceError, DomainError, ShapeError
from ..numkit import AdamWState, Mlp2, Rng, adamw_step
from .config import EstimatorConfig
from .features import SampleBatch

__all__ = [
    "ClubEstimator",
    "club_train",
    "club_estimate",
    "emi_estimate",
    "loglik_slope",
]

_LOG_2PI = math.log(2.0 * math.pi)
_LOGVAR_MIN = -10.0
_LOGVAR_MAX = 10.0

BatchSource = Callable[[], SampleBatch]


@dataclass
class ClubEstimator:
    """Trained conditional-density networks plus the training trace."""

    mean_net: Mlp2
    logvar_net: Mlp2
    d_x: int
    d_y: int
    loglik_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def conditional_params(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-row mean and clamped log-variance of q(y|x)."""
        mu = self.mean_net.forward(x)
        logvar = np.clip(self.logvar_net.forward(x), _LOGVAR_MIN, _LOGVAR_MAX)
        return mu, logvar

    def log_density(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """log q(y_i | x_i) for index-aligned rows."""
        mu, logvar = self.conditional_params(x)
        resid2 = (y - mu) ** 2
        return -0.5 * np.sum(logvar + resid2 * np.exp(-logvar) + _LOG_2PI, axis=1)


def _init_estimator(d_x: int, d_y: int, cfg: EstimatorConfig) -> ClubEstimator:
    rng = Rng(cfg.seed)
    return ClubEstimator(
        mean_net=Mlp2(d_x, cfg.hidden, d_y, rng.child("mean")),
        logvar_net=Mlp2(d_x, cfg.hidden, d_y, rng.child("logvar")),
        d_x=d_x,
        d_y=d_y,
    )


def club_train(batch_source: BatchSource, cfg: EstimatorConfig) -> ClubEstimator:
    """Fit the conditional Gaussian by maximum likelihood.

    ``batch_source`` is called once per iteration and must return a fresh
    SampleBatch. Training is deterministic given ``cfg.seed`` and the
    source; zero iterations returns the untouched initialization.
    """
    probe = batch_source()
    est = _init_estimator(probe.d_x, probe.d_y, cfg)
    if cfg.iterations == 0:
        return est

    params = {}
    for name, arr in est.mean_net.params.items():
        params["mean." + name] = arr
    for name, arr in est.logvar_net.params.items():
        params["logvar." + name] = arr
    opt = AdamWState(params)

    trace = np.empty(cfg.iterations)
    batch = probe
    for it in range(cfg.iterations):
        x, y = batch.x, batch.y
        n = x.shape[0]
        mu, mean_cache = est.mean_net.forward_cached(x)
        raw_lv, lv_cache = est.logvar_net.forward_cached(x)
        inside = (raw_lv > _LOGVAR_MIN) & (raw_lv < _LOGVAR_MAX)
        logvar = np.clip(raw_lv, _LOGVAR_MIN, _LOGVAR_MAX)
        inv_var = np.exp(-logvar)
        resid = y - mu
        loglik = -0.5 * np.mean(
            np.sum(logvar + resid * resid * inv_var + _LOG_2PI, axis=1)
        )
        if not np.isfinite(loglik):
            raise ConvergenceError(
                f"non-finite training loss at iteration {it}", residual=float(loglik)
            )
        trace[it] = loglik

        # Minimize the negative mean log-likelihood. The clamp is hard,
        # so saturated log-variance outputs get zero gradient.
        g_mu = -(resid * inv_var) / n
        g_lv = (0.5 * (1.0 - resid * resid * inv_var) / n) * inside
        mean_grads, _ = est.mean_net.backward(mean_cache, g_mu)
        lv_grads, _ = est.logvar_net.backward(lv_cache, g_lv)
        grads = {"mean." + k: v for k, v in mean_grads.items()}
        grads.update({"logvar." + k: v for k, v in lv_grads.items()})
        adamw_step(params, grads, opt, lr=cfg.lr)
        if it + 1 < cfg.iterations:
            batch = batch_source()

    est.loglik_trace = trace
    return est


def loglik_slope(trace: np.ndarray, tail_frac: float = 0.1) -> tuple[float, float]:
    """Least-squares slope of the trailing training-likelihood segment
    and its standard error. A healthy fit has slope >= -3 standard
    errors (likelihood no longer falling)."""
    trace = np.asarray(trace, dtype=np.float64)
    if not 0.0 < tail_frac <= 1.0:
        raise DomainError(f"tail_frac must be in (0, 1], got {tail_frac!r}")
    if trace.size < 2:
        raise DomainError(f"need a trace of at least 2 points, got {trace.size}")
    k = max(2, int(round(tail_frac * trace.size)))
    tail = trace[-k:]
    t = np.arange(k, dtype=np.float64)
    t -= t.mean()
    denom = float(np.dot(t, t))
    slope = float(np.dot(t, tail - tail.mean())) / denom
    resid = tail - tail.mean() - slope * t
    dof = max(1, k - 2)
    stderr = math.sqrt(float(np.dot(resid, resid)) / dof / denom)
    return slope, stderr


def club_estimate(est: ClubEstimator, batch: SampleBatch) -> float:
    """Aligned-pair minus all-pairs mean log-density.

    The all-pairs term sums log q(y_j | x_i) over every (i, j) cell. For
    a diagonal Gaussian that average depends on y only through its
    first and second moments, so it is computed exactly in O(n * d)
    instead of materializing the n x n grid.
    """
    if batch.d_x != est.d_x or batch.d_y != est.d_y:
        raise ShapeError(
            f"batch dims ({batch.d_x}, {batch.d_y}) do not match "
            f"estimator dims ({est.d_x}, {est.d_y})"
        )
    x, y = batch.x, batch.y
    mu, logvar = est.conditional_params(x)
    inv_var = np.exp(-logvar)
    positive = -0.5 * np.mean(np.sum(logvar + (y - mu) ** 2 * inv_var + _LOG_2PI, axis=1))
    # mean_j (y_j - mu_i)^2 = E[y^2] - 2 mu_i E[y] + mu_i^2, per dimension
    ey = y.mean(axis=0)
    ey2 = (y * y).mean(axis=0)
    cross_sq = ey2[None, :] - 2.0 * mu * ey[None, :] + mu * mu
    negative = -0.5 * np.mean(np.sum(logvar + cross_sq * inv_var + _LOG_2PI, axis=1))
    return float(positive - negative)


def emi_estimate(
    model_batch: SampleBatch, ref_batch: SampleBatch, est: ClubEstimator
) -> float:
    """Model-vs-reference dependence gap on a shared query distribution:
    the aligned/cross log-density gap for model responses minus the same
    gap for reference responses, under one estimator trained on both
    response populations."""
    return club_estimate(est, model_batch) - club_estimate(est, ref_batch)
