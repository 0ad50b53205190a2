"""Pairwise-critic mutual-information estimators.

All three estimators train the same scalar critic T(x, y) (a two-layer
tanh network on the concatenated pair) on fresh batches and differ only
in the variational objective. Scores for all n x n pairs of a batch are
computed in row chunks so memory stays bounded at large batch sizes;
aligned pairs sit on the diagonal and the off-diagonal cells serve as
product-measure samples.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import ConvergenceError
from ..numkit import AdamWState, Mlp2, Rng, adamw_step
from .config import EstimatorConfig
from .features import SampleBatch

__all__ = ["mine_estimate", "nwj_estimate", "infonce_estimate"]

BatchSource = Callable[[], SampleBatch]

_MINE_EMA_DECAY = 0.99
_CHUNK_CELLS = 32768
_EVAL_TARGET = 10000


def _pair_rows(x: np.ndarray, y: np.ndarray, rows: slice) -> np.ndarray:
    """Concatenated inputs for every (x_i, y_j) cell with i in ``rows``."""
    xr = x[rows]
    r = xr.shape[0]
    n = y.shape[0]
    left = np.repeat(xr, n, axis=0)
    right = np.tile(y, (r, 1))
    return np.concatenate([left, right], axis=1)


def _score_matrix(net: Mlp2, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    chunk = max(1, _CHUNK_CELLS // n)
    out = np.empty((n, n))
    for start in range(0, n, chunk):
        rows = slice(start, min(start + chunk, n))
        out[rows] = net.forward(_pair_rows(x, y, rows)).reshape(-1, n)
    return out


def _backward_chunked(
    net: Mlp2, x: np.ndarray, y: np.ndarray, gout: np.ndarray
) -> dict[str, np.ndarray]:
    """Accumulate critic gradients for a full gradient matrix gout[i, j]
    = d objective / d T(x_i, y_j), recomputing activations per chunk."""
    n = x.shape[0]
    chunk = max(1, _CHUNK_CELLS // n)
    total: dict[str, np.ndarray] | None = None
    for start in range(0, n, chunk):
        rows = slice(start, min(start + chunk, n))
        inp = _pair_rows(x, y, rows)
        _, cache = net.forward_cached(inp)
        grads, _ = net.backward(cache, gout[rows].reshape(-1, 1))
        if total is None:
            total = grads
        else:
            for k in total:
                total[k] += grads[k]
    assert total is not None
    return total


def _logmeanexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + math.log(float(np.mean(np.exp(values - m))))


def _offdiag_mask(n: int) -> np.ndarray:
    return ~np.eye(n, dtype=bool)


def _train_critic(
    batch_source: BatchSource, cfg: EstimatorConfig, objective: str
) -> tuple[Mlp2, SampleBatch]:
    probe = batch_source()
    rng = Rng(cfg.seed)
    net = Mlp2(probe.d_x + probe.d_y, cfg.hidden, 1, rng.child("critic"))
    opt = AdamWState(net.params)
    ema = 1.0
    batch = probe
    for it in range(cfg.iterations):
        x, y = batch.x, batch.y
        n = x.shape[0]
        scores = _score_matrix(net, x, y)
        if not np.all(np.isfinite(scores)):
            raise ConvergenceError(f"non-finite critic scores at iteration {it}")
        mask = _offdiag_mask(n)
        grad = np.zeros((n, n))
        if objective == "infonce":
            # Per-row softmax over all candidate responses; diagonal is
            # the matched response.
            shifted = scores - scores.max(axis=1, keepdims=True)
            soft = np.exp(shifted)
            soft /= soft.sum(axis=1, keepdims=True)
            grad = -soft / n
            grad[np.diag_indices(n)] += 1.0 / n
        elif objective == "nwj":
            off = np.exp(scores - 1.0)
            grad[np.diag_indices(n)] = 1.0 / n
            grad -= np.where(mask, off, 0.0) / (n * (n - 1))
        elif objective == "mine":
            off_exp = np.where(mask, np.exp(scores), 0.0)
            batch_mean = float(off_exp.sum() / (n * (n - 1)))
            if not np.isfinite(batch_mean):
                raise ConvergenceError(f"non-finite partition term at iteration {it}")
            ema = _MINE_EMA_DECAY * ema + (1.0 - _MINE_EMA_DECAY) * batch_mean
            grad[np.diag_indices(n)] = 1.0 / n
            grad -= off_exp / (ema * n * (n - 1))
        else:
            raise ValueError(f"unknown objective {objective!r}")
        # AdamW minimizes; objectives are maximized.
        grads = _backward_chunked(net, x, y, -grad)
        adamw_step(net.params, grads, opt, lr=cfg.lr)
        if it + 1 < cfg.iterations:
            batch = batch_source()
    return net, probe


def _objective_value(net: Mlp2, batch: SampleBatch, objective: str) -> float:
    x, y = batch.x, batch.y
    n = x.shape[0]
    scores = _score_matrix(net, x, y)
    diag = np.diagonal(scores)
    mask = _offdiag_mask(n)
    if objective == "infonce":
        shifted = scores - scores.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1)) + scores.max(axis=1)
        value = float(np.mean(diag - lse)) + math.log(n)
        return min(value, math.log(n))
    if objective == "nwj":
        return float(np.mean(diag)) - math.exp(-1.0) * float(
            np.mean(np.exp(scores[mask]))
        )
    if objective == "mine":
        return float(np.mean(diag)) - _logmeanexp(scores[mask])
    raise ValueError(f"unknown objective {objective!r}")


def _estimate(batch_source: BatchSource, cfg: EstimatorConfig, objective: str) -> float:
    """Train, then average the objective over enough fresh evaluation
    batches to cover about ten thousand pairs."""
    net, probe = _train_critic(batch_source, cfg, objective)
    n_eval = max(1, _EVAL_TARGET // probe.n)
    values = []
    for _ in range(n_eval):
        values.append(_objective_value(net, batch_source(), objective))
    return float(np.mean(values))


def mine_estimate(batch_source: BatchSource, cfg: EstimatorConfig) -> float:
    """Donsker-Varadhan lower bound; the partition-term gradient is
    debiased with an exponential moving average (decay 0.99)."""
    return _estimate(batch_source, cfg, "mine")


def nwj_estimate(batch_source: BatchSource, cfg: EstimatorConfig) -> float:
    """Nguyen-Wainwright-Jordan bound E[T] - e^-1 E[e^T]."""
    return _estimate(batch_source, cfg, "nwj")


def infonce_estimate(batch_source: BatchSource, cfg: EstimatorConfig) -> float:
    """Contrastive ranking bound; capped at log(batch) by construction
    and clamped there explicitly to guard float drift."""
    return _estimate(batch_source, cfg, "infonce")
