"""Kernel two-sample discrepancy with a Gaussian kernel."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, ShapeError

__all__ = ["mmd"]


def _check_sample(a: np.ndarray, label: str) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{label} must be 2-d (n, d), got {a.shape}")
    if a.shape[0] < 2:
        raise ShapeError(f"{label} needs at least 2 rows for an unbiased estimate")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{label} must be finite")
    return a


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d2 = aa + bb - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _median_bandwidth(a: np.ndarray, b: np.ndarray) -> float:
    pooled = np.concatenate([a, b], axis=0)
    d2 = _sq_dists(pooled, pooled)
    iu = np.triu_indices(pooled.shape[0], k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    if med <= 0.0:
        raise DomainError("median pairwise distance is zero: degenerate bandwidth")
    return med


def mmd(a: np.ndarray, b: np.ndarray, bandwidth: float | str = "median") -> float:
    """Unbiased squared maximum mean discrepancy, Gaussian kernel
    exp(-|u - v|^2 / (2 s^2)).

    ``bandwidth`` is either a positive length scale or the string
    ``"median"``, which sets s to the median pairwise distance of the
    pooled sample. The unbiased estimate can be slightly negative for
    close samples; identical samples give a value <= 0.
    """
    a = _check_sample(a, "a")
    b = _check_sample(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    if isinstance(bandwidth, str):
        if bandwidth != "median":
            raise DomainError(f"unknown bandwidth rule {bandwidth!r}")
        s = _median_bandwidth(a, b)
    else:
        s = float(bandwidth)
        if not (s > 0.0) or not np.isfinite(s):
            raise DomainError(f"bandwidth must be positive and finite, got {s}")
    gamma = 1.0 / (2.0 * s * s)
    m, n = a.shape[0], b.shape[0]
    kaa = np.exp(-gamma * _sq_dists(a, a))
    kbb = np.exp(-gamma * _sq_dists(b, b))
    kab = np.exp(-gamma * _sq_dists(a, b))
    term_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    term_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    term_ab = 2.0 * kab.mean()
    return float(term_a + term_b - term_ab)
