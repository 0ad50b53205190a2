"""Decoupled AdamW over named parameter dicts.

Weight decay multiplies the parameter directly (decoupled form); it never
enters the first or second moment.  With the defaults and a fresh state,
one step on a zero parameter with gradient 1 moves it by
``-lr / (1 + eps)``, which the unit tests pin.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import backend

__all__ = ["AdamWState", "adamw_step"]


class AdamWState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> None:
    """Update ``params`` in place; increments ``state.t`` once per call."""
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeError(
            f"parameter/gradient/state name mismatch: {sorted(params)} vs "
            f"{sorted(grads)} vs {sorted(state.m)}"
        )
    state.t += 1
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}"
            )
        backend.adamw_update(
            p.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
            state.m[name].reshape(-1), state.v[name].reshape(-1),
            state.t, lr, beta1, beta2, eps, weight_decay,
        )
