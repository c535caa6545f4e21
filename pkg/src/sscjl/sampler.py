"""Seeded sampling of sparse sign-consistent matrices.

Random streams
--------------
Every stream is a Philox4x64 generator keyed by the 64-bit master seed with
its 256-bit counter initialised to ``[0, lane, stream_id, 0]``.  Distinct
``(master_seed, lane, stream_id)`` triples therefore start at disjoint
counter positions (2**64 blocks apart per lane, 2**128 per stream), so the
derivation is injective and does not depend on the order in which streams
are consumed.  Lanes partition the draws of one trial:

* lane 0 (``LANE_MATRIX``) - the sparse matrix itself
* lane 1 (``LANE_VECTOR``) - random test vectors
* lane 2 (``LANE_BASELINE``) - dense Rademacher baseline matrices

Within a matrix stream the supports of all columns are drawn first (column
major, ``s`` integers per column), then one sign per column.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import DataError, ParameterError

LANE_MATRIX = 0
LANE_VECTOR = 1
LANE_BASELINE = 2

MATRIX_FORMAT = "sscjl-matrix"
MATRIX_FORMAT_VERSION = 1

_U64 = 2**64


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= int(self.master_seed) < _U64):
            raise ParameterError("master_seed", "must be an unsigned 64-bit integer")
        if not (0 <= int(self.stream_id) < _U64):
            raise ParameterError("stream_id", "must be a non-negative 64-bit integer")

    def generator(self, lane: int = LANE_MATRIX) -> np.random.Generator:
        return make_rng(self.master_seed, self.stream_id, lane)


def make_rng(master_seed: int, stream_id: int = 0, lane: int = LANE_MATRIX) -> np.random.Generator:
    counter = np.array([0, int(lane), int(stream_id), 0], dtype=np.uint64)
    bitgen = np.random.Philox(key=int(master_seed), counter=counter)
    return np.random.Generator(bitgen)


@dataclass(frozen=True, eq=False)
class SSCMatrix:
    """Column-sparse sign-consistent matrix with implicit values.

    Entry ``(i, j)`` equals ``signs[j] / sqrt(s)`` when ``i`` is in
    ``supports[j]`` and zero otherwise.  ``supports`` is an ``(m, s)`` int64
    array whose rows are sorted and distinct.
    """

    d: int
    m: int
    s: int
    supports: np.ndarray
    signs: np.ndarray
    master_seed: int | None = None
    stream_id: int | None = None

    def __post_init__(self):
        self.supports.setflags(write=False)
        self.signs.setflags(write=False)

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.s)

    def __eq__(self, other):
        if not isinstance(other, SSCMatrix):
            return NotImplemented
        return (
            (self.d, self.m, self.s) == (other.d, other.m, other.s)
            and np.array_equal(self.supports, other.supports)
            and np.array_equal(self.signs, other.signs)
        )

    __hash__ = None

    def check_structure(self) -> list[str]:
        """Exact structural check; returns violations (empty if sound)."""
        problems = []
        sup, sg = self.supports, self.signs
        if sup.shape != (self.m, self.s):
            problems.append(f"supports shape {sup.shape} != {(self.m, self.s)}")
            return problems
        if sg.shape != (self.m,):
            problems.append(f"signs shape {sg.shape} != {(self.m,)}")
        if sup.size and (sup.min() < 0 or sup.max() >= self.d):
            problems.append("support index outside [0, d)")
        if self.s > 1 and not np.all(np.diff(sup, axis=1) > 0):
            problems.append("supports not strictly increasing (sorted and distinct)")
        if not np.all(np.abs(sg) == 1):
            problems.append("column sign not in {-1, +1}")
        return problems

    def to_dense(self) -> np.ndarray:
        """Materialise the d x m matrix (small sizes only; used by oracles)."""
        dense = np.zeros((self.d, self.m))
        cols = np.repeat(np.arange(self.m), self.s)
        dense[self.supports.ravel(), cols] = np.repeat(self.signs * self.scale, self.s)
        return dense

    def to_scipy(self):
        """Return an equivalent ``scipy.sparse.csc_array`` for bulk products."""
        from scipy.sparse import csc_array

        data = np.repeat(self.signs.astype(float) * self.scale, self.s)
        indptr = np.arange(0, self.m * self.s + 1, self.s, dtype=np.int64)
        return csc_array((data, self.supports.ravel(), indptr), shape=(self.d, self.m))


def _check_dims(d, s, m=1):
    if int(d) < 1:
        raise ParameterError("d", f"must be >= 1, got {d}")
    if int(m) < 1:
        raise ParameterError("m", f"must be >= 1, got {m}")
    if not (1 <= int(s) <= int(d)):
        raise ParameterError("s", f"must satisfy 1 <= s <= d={d}, got {s}")


def _floyd_draws(rng: np.random.Generator, d: int, s: int, n_cols: int) -> np.ndarray:
    # draw k of a column is uniform on [0, d - s + k]
    highs = np.arange(d - s + 1, d + 1, dtype=np.int64)
    return rng.integers(0, highs, size=(n_cols, s), dtype=np.int64)


@numba.njit(cache=True, nogil=True)
def _floyd_kernel(d, s, draws, out):
    taken = np.zeros(d, dtype=np.bool_)
    for c in range(draws.shape[0]):
        for k in range(s):
            t = draws[c, k]
            if taken[t]:
                t = d - s + k
            taken[t] = True
            out[c, k] = t
        for k in range(s):
            taken[out[c, k]] = False
        out[c].sort()


def sample_support(d: int, s: int, rng: np.random.Generator) -> list[int]:
    """Uniform ``s``-subset of ``range(d)`` via Floyd's algorithm, sorted."""
    _check_dims(d, s)
    draws = _floyd_draws(rng, d, s, 1)[0]
    chosen = set()
    for k, t in enumerate(draws.tolist()):
        chosen.add(d - s + k if t in chosen else t)
    return sorted(chosen)


def sample_supports(d: int, s: int, n_cols: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`sample_support` for ``n_cols`` independent columns."""
    _check_dims(d, s, n_cols)
    draws = _floyd_draws(rng, d, s, n_cols)
    out = np.empty_like(draws)
    _floyd_kernel(d, s, draws, out)
    return out


def sample_matrix(d: int, m: int, s: int, seed: SeedSpec | int) -> SSCMatrix:
    if not isinstance(seed, SeedSpec):
        seed = SeedSpec(int(seed))
    _check_dims(d, s, m)
    rng = seed.generator(LANE_MATRIX)
    supports = sample_supports(d, s, m, rng)
    signs = (2 * rng.integers(0, 2, size=m, dtype=np.int8) - 1).astype(np.int8)
    return SSCMatrix(
        d=int(d), m=int(m), s=int(s), supports=supports, signs=signs,
        master_seed=int(seed.master_seed), stream_id=int(seed.stream_id),
    )


def save_matrix(matrix: SSCMatrix, path) -> None:
    """Write ``matrix`` as a versioned ``.npz`` archive (lossless)."""
    header = {
        "format": MATRIX_FORMAT,
        "version": MATRIX_FORMAT_VERSION,
        "d": matrix.d,
        "m": matrix.m,
        "s": matrix.s,
        "master_seed": matrix.master_seed,
        "stream_id": matrix.stream_id,
    }
    buf = io.BytesIO()
    np.savez_compressed(
        buf,
        header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
        supports=np.ascontiguousarray(matrix.supports, dtype=np.int64),
        signs=np.ascontiguousarray(matrix.signs, dtype=np.int8),
    )
    Path(path).write_bytes(buf.getvalue())


def load_matrix(path) -> SSCMatrix:
    with np.load(Path(path), allow_pickle=False) as archive:
        header = json.loads(archive["header"].tobytes().decode())
        supports = archive["supports"].copy()
        signs = archive["signs"].copy()
    if header.get("format") != MATRIX_FORMAT:
        raise DataError(f"not an {MATRIX_FORMAT} file")
    if header.get("version") != MATRIX_FORMAT_VERSION:
        raise DataError(f"unsupported matrix format version {header.get('version')}")
    matrix = SSCMatrix(
        d=header["d"], m=header["m"], s=header["s"], supports=supports, signs=signs,
        master_seed=header["master_seed"], stream_id=header["stream_id"],
    )
    problems = matrix.check_structure()
    if problems:
        raise DataError("corrupt matrix file: " + "; ".join(problems))
    return matrix
