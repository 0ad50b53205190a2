"""Representation-level divergence from covariance spectra.

Two feature samples are compared through the von Neumann entropy of
their (unit-normalized) second-moment matrices: the entropy of the
averaged matrix minus the average of the entropies. The value lives in
[0, ln 2] like its distributional counterpart and vanishes only when the
spectra coincide.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, ShapeError
from ..numkit import eig_sym

__all__ = ["rjsd"]

_EIG_FLOOR = 1e-12


def _unit_rows(a: np.ndarray, label: str) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{label} must be 2-d (n, d), got {a.shape}")
    if a.shape[0] == 0:
        raise ShapeError(f"{label} must be non-empty")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{label} must be finite")
    norms = np.sqrt(np.sum(a * a, axis=1))
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise DomainError(f"{label} row {bad[0]} has zero norm and cannot be normalized")
    return a / norms[:, None]


def _second_moment(a: np.ndarray) -> np.ndarray:
    return (a.T @ a) / a.shape[0]


def _spectral_entropy(c: np.ndarray) -> float:
    lam = eig_sym(c).values
    keep = lam > _EIG_FLOOR
    lam = lam[keep]
    return float(-np.sum(lam * np.log(lam)))


def rjsd(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral divergence between two feature samples.

    Rows are normalized to unit Euclidean norm internally, so the
    comparison is direction-only. Exactly symmetric in its arguments.
    """
    a = _unit_rows(a, "a")
    b = _unit_rows(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    ca = _second_moment(a)
    cb = _second_moment(b)
    mixed = 0.5 * (ca + cb)
    return _spectral_entropy(mixed) - 0.5 * (
        _spectral_entropy(ca) + _spectral_entropy(cb)
    )
