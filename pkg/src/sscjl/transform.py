"""Applying the embedding, distortion energy, and the quadratic-form oracle."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, NormalizationError, ShapeError
from .sampler import SSCMatrix

UNIT_TOL = 1e-9


@dataclass
class VectorBatch:
    vectors: np.ndarray  # (n, m)
    labels: Optional[list] = None

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if self.vectors.ndim != 2:
            raise ShapeError("vectors must form an (n, m) array")
        if not np.all(np.isfinite(self.vectors)):
            raise DataError("non-finite entry in vector batch")
        if self.labels is not None and len(self.labels) != len(self.vectors):
            raise ShapeError("labels and vectors differ in length")

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]


def read_vectors(path, delimiter: str = ",", labeled: bool = False) -> VectorBatch:
    """Parse one vector per line; blank lines are ignored.

    With ``labeled=True`` the first field of every line is kept as a string
    label.  Ragged rows and non-numeric or non-finite fields raise
    :class:`DataError` carrying the 1-based line number.
    """
    rows, labels = [], []
    width = None
    with open(Path(path), newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if labeled:
                labels.append(fields[0].strip())
                fields = fields[1:]
            if width is None:
                width = len(fields)
                if width == 0:
                    raise DataError("no numeric fields", line=lineno)
            elif len(fields) != width:
                raise DataError(f"ragged row: {len(fields)} fields, expected {width}", line=lineno)
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise DataError(f"unparseable value ({exc})", line=lineno) from None
            if not all(math.isfinite(v) for v in row):
                raise DataError("non-finite value", line=lineno)
            rows.append(row)
    if not rows:
        raise DataError("input contains no vectors")
    return VectorBatch(np.array(rows), labels if labeled else None)


def write_vectors(path, vectors: np.ndarray, labels: Optional[Sequence] = None, delimiter: str = ",") -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for i, row in enumerate(np.atleast_2d(vectors)):
            fields = [repr(float(v)) for v in row]
            writer.writerow(([labels[i]] if labels is not None else []) + fields)


def _as_input(A: SSCMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.m,):
        raise ShapeError(f"expected vector of length {A.m}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite entry in input vector")
    return x


def apply(A: SSCMatrix, x) -> np.ndarray:
    """Compute ``A @ x`` column by column without materialising ``A``."""
    x = _as_input(A, x)
    weights = np.repeat(A.signs * x, A.s)
    return np.bincount(A.supports.ravel(), weights=weights, minlength=A.d) * A.scale


def apply_batch(A: SSCMatrix, X) -> np.ndarray:
    """Embed every row of ``X``; returns an ``(n, d)`` array."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != A.m:
        raise ShapeError(f"expected rows of length {A.m}, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite entry in input batch")
    return np.asarray((A.to_scipy() @ X.T).T)


def _check_unit(x: np.ndarray) -> None:
    norm = math.sqrt(float(np.dot(x, x)))
    if abs(norm - 1.0) > UNIT_TOL:
        raise NormalizationError(f"input must have unit norm (got {norm!r})")


def distortion_energy(A: SSCMatrix, x) -> float:
    """``||Ax||^2 - 1`` for a unit vector ``x``."""
    x = _as_input(A, x)
    _check_unit(x)
    y = apply(A, x)
    return float(np.dot(y, y)) - 1.0


def _column(A: SSCMatrix, j: int) -> np.ndarray:
    if not (0 <= j < A.m):
        raise ShapeError(f"column {j} out of range [0, {A.m})")
    return A.supports[j]


def gram_overlap(A: SSCMatrix, j: int, k: int) -> float:
    """Fraction of the ``s`` support rows shared by columns ``j`` and ``k``."""
    a, b = _column(A, j), _column(A, k)
    return np.intersect1d(a, b, assume_unique=True).size / A.s


def overlap_counts(sup_a: np.ndarray, sup_b: np.ndarray) -> np.ndarray:
    """Row-wise intersection sizes of two ``(n, s)`` arrays of sorted supports."""
    both = np.sort(np.concatenate([sup_a, sup_b], axis=1), axis=1)
    return np.count_nonzero(both[:, 1:] == both[:, :-1], axis=1)


def quadratic_form_direct(A: SSCMatrix, x) -> float:
    """Evaluate the off-diagonal quadratic form term by term.

    O(m^2 s); intended as an oracle for :func:`distortion_energy`.
    """
    x = _as_input(A, x)
    _check_unit(x)
    total = 0.0
    for j in range(A.m):
        for k in range(A.m):
            if j == k:
                continue
            q = gram_overlap(A, j, k)
            if q:
                total += q * int(A.signs[j]) * int(A.signs[k]) * x[j] * x[k]
    return total


@dataclass
class PairwiseDistortion:
    n_pairs: int
    n_skipped: int
    min_ratio: float
    max_ratio: float
    max_abs_deviation: float
    hist_counts: list = field(default_factory=list)
    hist_edges: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def pairwise_distortion(A: SSCMatrix, batch: VectorBatch, bins: int = 20) -> PairwiseDistortion:
    """Ratio ``||A(x - x')|| / ||x - x'||`` over all pairs of the batch.

    Pairs with ``x == x'`` are skipped and counted.
    """
    if len(batch) == 0:
        raise DataError("empty batch")
    if batch.m != A.m:
        raise ShapeError(f"batch dimension {batch.m} != matrix columns {A.m}")
    X = batch.vectors
    Y = apply_batch(A, X)
    i, k = np.triu_indices(len(X), k=1)
    diff_in = np.linalg.norm(X[i] - X[k], axis=1)
    diff_out = np.linalg.norm(Y[i] - Y[k], axis=1)
    keep = diff_in > 0
    ratios = diff_out[keep] / diff_in[keep]
    if ratios.size == 0:
        return PairwiseDistortion(0, int(i.size), math.nan, math.nan, math.nan)
    counts, edges = np.histogram(ratios, bins=bins)
    return PairwiseDistortion(
        n_pairs=int(ratios.size),
        n_skipped=int(i.size - ratios.size),
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
        max_abs_deviation=float(np.max(np.abs(ratios - 1.0))),
        hist_counts=counts.tolist(),
        hist_edges=edges.tolist(),
    )
