"""Paired feature batches and the feature-dump interchange format.

The dump format is the ingestion boundary for externally produced
embeddings: a header ``#emi-features v1 d_x=<int> d_y=<int>`` followed by
one record per line, ``index<TAB>x floats comma-separated<TAB>y floats``.
Floats are written in shortest round-trip decimal form, so a write/read
cycle reproduces the arrays bitwise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, ShapeError

__all__ = ["SampleBatch", "write_features", "read_features"]

_HEADER_PREFIX = "#emi-features v1"


@dataclass(frozen=True)
class SampleBatch:
    """Index-paired (query, response) feature vectors."""

    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2:
            raise ShapeError(
                f"x and y must be 2-d (n, dim), got {x.shape} and {y.shape}"
            )
        if x.shape[0] != y.shape[0]:
            raise ShapeError(f"pair count mismatch: {x.shape[0]} vs {y.shape[0]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("feature batches must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def d_y(self) -> int:
        return self.y.shape[1]

    def take(self, idx) -> "SampleBatch":
        return SampleBatch(x=self.x[idx], y=self.y[idx], meta=dict(self.meta))

    def shuffled_y(self, perm: np.ndarray) -> "SampleBatch":
        """Break the pairing by permuting responses; used to build
        product-measure (independent) batches."""
        return SampleBatch(x=self.x, y=self.y[perm], meta=dict(self.meta))


def write_features(path: str | os.PathLike, batch: SampleBatch) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_HEADER_PREFIX} d_x={batch.d_x} d_y={batch.d_y}\n")
        for i in range(batch.n):
            xs = ",".join(repr(float(v)) for v in batch.x[i])
            ys = ",".join(repr(float(v)) for v in batch.y[i])
            fh.write(f"{i}\t{xs}\t{ys}\n")


def read_features(path: str | os.PathLike) -> SampleBatch:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(_HEADER_PREFIX):
            raise DomainError(f"not a feature dump: header {header!r}")
        fields = dict(part.split("=", 1) for part in header.split()[2:])
        try:
            d_x, d_y = int(fields["d_x"]), int(fields["d_y"])
        except (KeyError, ValueError) as exc:
            raise DomainError(f"malformed feature header {header!r}") from exc
        xs, ys = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DomainError(f"line {lineno}: expected 3 tab fields, got {len(parts)}")
            try:
                xs.append([float(v) for v in parts[1].split(",")])
                ys.append([float(v) for v in parts[2].split(",")])
            except ValueError as exc:
                raise DomainError(f"line {lineno}: unparseable float field") from exc
    x = np.array(xs, dtype=np.float64).reshape(len(xs), d_x)
    y = np.array(ys, dtype=np.float64).reshape(len(ys), d_y)
    return SampleBatch(x=x, y=y, meta={"path": str(path)})
