"""Two-layer tanh perceptron with hand-written gradients.

Parameters live in a plain dict of float64 arrays so the optimizer can walk
them by name.  The backward pass consumes the cache returned by
``forward_cached``; gradients are exact, which the finite-difference tests
pin down.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import backend
from .rng import Rng

__all__ = ["Mlp2"]


class Mlp2:
    """``out = tanh(x @ w1 + b1) @ w2 + b2``."""

    def __init__(self, d_in: int, hidden: int, d_out: int, rng: Rng):
        if d_in < 1 or hidden < 1 or d_out < 1:
            raise ShapeError(
                f"layer sizes must be positive, got ({d_in}, {hidden}, {d_out})"
            )
        self.d_in = int(d_in)
        self.hidden = int(hidden)
        self.d_out = int(d_out)
        self.params: dict[str, np.ndarray] = {
            "w1": rng.normal(0.0, 1.0 / np.sqrt(d_in), (d_in, hidden)),
            "b1": np.zeros(hidden),
            "w2": rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, d_out)),
            "b2": np.zeros(d_out),
        }
        for k, v in self.params.items():
            self.params[k] = np.ascontiguousarray(v, dtype=np.float64)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeError(
                f"expected input of shape (batch, {self.d_in}), got {x.shape}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        """Returns ``(out, cache)``; pass the cache to :meth:`backward`."""
        x = self._check_input(x)
        nb = x.shape[0]
        p = self.params
        hid = np.empty((nb, self.hidden))
        out = np.empty((nb, self.d_out))
        backend.mlp2_forward(x, p["w1"], p["b1"], p["w2"], p["b2"], hid, out)
        return out, (x, hid)

    def backward(self, cache, gout: np.ndarray, compute_dx: bool = False):
        """Gradients of ``sum(out * gout)`` with respect to the parameters.

        Returns ``(grads, dx)``; ``dx`` is None unless ``compute_dx``.
        """
        x, hid = cache
        gout = np.ascontiguousarray(gout, dtype=np.float64)
        if gout.shape != (x.shape[0], self.d_out):
            raise ShapeError(
                f"expected gout of shape ({x.shape[0]}, {self.d_out}), got {gout.shape}"
            )
        p = self.params
        grads = {
            "w1": np.zeros_like(p["w1"]),
            "b1": np.zeros_like(p["b1"]),
            "w2": np.zeros_like(p["w2"]),
            "b2": np.zeros_like(p["b2"]),
        }
        dz = np.empty_like(hid)
        dx = np.empty_like(x) if compute_dx else np.empty((0, 0))
        backend.mlp2_backward(
            x, hid, p["w1"], p["w2"], gout,
            grads["w1"], grads["b1"], grads["w2"], grads["b2"],
            dz, dx, bool(compute_dx),
        )
        return grads, (dx if compute_dx else None)
