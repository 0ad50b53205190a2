"""Deterministic random streams with labeled child lineage.

A :class:`Rng` wraps numpy's PCG64 generator.  Children are derived from a
parent by hashing a text label, so the stream layout of a run is a pure
function of the root seed and the labels on the derivation path.  Drawing
from a child never disturbs the parent's stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import DomainError

__all__ = ["Rng"]


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class Rng:
    """Seeded random generator with deterministic child streams.

    Equal seeds give bitwise-equal draw sequences.  ``child(label)`` returns
    an independent stream; distinct labels give distinct streams and the
    derivation is stable across processes and platforms.
    """

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
            raise DomainError(f"seed must be an integer, got {type(seed).__name__}")
        if seed < 0:
            raise DomainError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self._spawn_key = _spawn_key
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=_spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, label: str) -> "Rng":
        """Derive an independent stream keyed by ``label``."""
        if not label:
            raise DomainError("child label must be a non-empty string")
        return Rng(self.seed, self._spawn_key + (_label_key(label),))

    # Draw methods delegate to the wrapped generator; all return float64
    # (or int64) arrays so downstream code never mixes precisions.

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size)

    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Integers drawn from ``[low, high)``."""
        if high <= low:
            raise DomainError(f"integers needs low < high, got [{low}, {high})")
        return self._gen.integers(low, high, size)

    def dirichlet(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.ndim != 1 or alpha.size < 1:
            raise DomainError("dirichlet needs a non-empty 1-d alpha")
        if np.any(alpha <= 0.0):
            raise DomainError("dirichlet alpha entries must be positive")
        if alpha.size == 1:
            # single-atom simplex: the only distribution, no draw needed
            return np.ones(1)
        return self._gen.dirichlet(alpha)

    def permutation(self, n: int) -> np.ndarray:
        if n < 0:
            raise DomainError(f"permutation length must be non-negative, got {n}")
        return self._gen.permutation(n)

    def choice(self, n: int, size=None, replace: bool = True, p=None) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace, p=p)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, depth={len(self._spawn_key)})"
