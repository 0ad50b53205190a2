"""Symmetric eigendecomposition via cyclic Jacobi rotations.

Jacobi is slower than LAPACK on big matrices but is simple, strictly
deterministic for a given backend, and accurate to machine precision on the
small Gram matrices this package produces (dimension = batch size of a
feature matrix, a few hundred at most).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, ShapeError
from . import backend

__all__ = ["EigResult", "eig_sym"]


@dataclass(frozen=True)
class EigResult:
    """Eigenvalues in descending order; ``vectors[:, i]`` pairs with
    ``values[i]``.  Columns are orthonormal."""

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int
    residual: float


def eig_sym(a: np.ndarray, max_sweeps: int = 100) -> EigResult:
    """Full eigendecomposition of a real symmetric matrix.

    Raises :class:`ShapeError` for non-square or asymmetric input and
    :class:`ConvergenceError` if the off-diagonal residual has not dropped
    below the scaled tolerance within ``max_sweeps`` cyclic sweeps.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"eig_sym needs a square 2-d matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = float(np.abs(a).max()) if n else 0.0
    asym = float(np.abs(a - a.T).max()) if n else 0.0
    if asym > 1e-12 * max(scale, 1.0):
        raise ShapeError(f"matrix is not symmetric: max|a - a.T| = {asym:.3e}")
    if max_sweeps < 1:
        raise ShapeError(f"max_sweeps must be >= 1, got {max_sweeps}")

    work = np.array(a, dtype=np.float64, order="C", copy=True)
    # symmetrize exactly so rotation arithmetic sees one consistent value
    work = np.ascontiguousarray(0.5 * (work + work.T))
    vecs = np.empty((n, n), dtype=np.float64, order="C")
    frob = float(np.sqrt((work * work).sum()))
    tol = 1e-14 * frob
    sweeps, resid = backend.jacobi_eig(work, vecs, int(max_sweeps), tol)
    if resid > tol and resid > 1e-12 * max(frob, 1.0):
        raise ConvergenceError(
            f"jacobi did not converge in {max_sweeps} sweeps, "
            f"off-diagonal residual {resid:.3e}",
            residual=resid,
        )

    vals = np.diag(work).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # canonical sign: first component of largest magnitude made positive
    for i in range(n):
        col = vecs[:, i]
        j = int(np.argmax(np.abs(col)))
        if col[j] < 0.0:
            vecs[:, i] = -col
    return EigResult(values=vals, vectors=vecs, sweeps=int(sweeps), residual=float(resid))
