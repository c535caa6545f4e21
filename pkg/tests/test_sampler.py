import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sscjl.errors import DataError, ParameterError
from sscjl.sampler import (
    SeedSpec,
    load_matrix,
    make_rng,
    sample_matrix,
    sample_support,
    sample_supports,
    save_matrix,
)


def within(freq, p, n, k=3.0):
    se = math.sqrt(p * (1 - p) / n)
    return abs(freq - p) <= k * se


def test_full_column():
    rng = make_rng(1)
    for _ in range(20):
        assert sample_support(5, 5, rng) == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("d,s", [(5, 0), (5, 6), (0, 0)])
def test_support_domain(d, s):
    with pytest.raises(ParameterError):
        sample_support(d, s, make_rng(0))


def test_singleton_frequencies():
    rng = make_rng(2)
    n = 100_000
    hits = np.bincount([sample_support(5, 1, rng)[0] for _ in range(n)], minlength=5)
    for c in hits:
        assert within(c / n, 0.2, n)


def test_two_subsets_uniform():
    rng = make_rng(3)
    n = 100_000
    subsets = list(itertools.combinations(range(4), 2))
    assert len(subsets) == 6
    counts = {sub: 0 for sub in subsets}
    for _ in range(n):
        counts[tuple(sample_support(4, 2, rng))] += 1
    for c in counts.values():
        assert within(c / n, 1 / 6, n)


def test_vectorised_kernel_matches_scalar_floyd():
    for d, s in [(4, 2), (10, 3), (50, 50), (1000, 7)]:
        a = make_rng(11)
        b = make_rng(11)
        vec = sample_supports(d, s, 30, a)
        scalar = [sample_support(d, s, b) for _ in range(30)]
        assert vec.tolist() == scalar


def test_dense_columns_only_signs_vary():
    A = sample_matrix(4, 3, 4, SeedSpec(9))
    assert A.supports.tolist() == [[0, 1, 2, 3]] * 3
    assert set(A.signs.tolist()) <= {-1, 1}


def test_determinism_and_stream_separation():
    a = sample_matrix(50, 40, 5, SeedSpec(77, 3))
    b = sample_matrix(50, 40, 5, SeedSpec(77, 3))
    assert a == b
    assert a.supports.tobytes() == b.supports.tobytes()
    assert a != sample_matrix(50, 40, 5, SeedSpec(77, 4))
    assert a != sample_matrix(50, 40, 5, SeedSpec(78, 3))


def test_lanes_are_distinct_streams():
    x = make_rng(5, 7, 0).integers(0, 2**62, 4)
    y = make_rng(5, 7, 1).integers(0, 2**62, 4)
    z = make_rng(5, 8, 0).integers(0, 2**62, 4)
    assert not np.array_equal(x, y) and not np.array_equal(x, z)


def test_seed_range():
    with pytest.raises(ParameterError):
        SeedSpec(-1)
    with pytest.raises(ParameterError):
        SeedSpec(2**64)
    SeedSpec(2**64 - 1, 2**64 - 1).generator()


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 80), data=st.data(), m=st.integers(1, 30), seed=st.integers(0, 2**64 - 1))
def test_structure_invariants(d, data, m, seed):
    s = data.draw(st.integers(1, d))
    A = sample_matrix(d, m, s, SeedSpec(seed))
    assert A.check_structure() == []
    dense = A.to_dense()
    nz = dense[dense != 0]
    assert np.allclose(np.abs(nz), 1 / math.sqrt(s), rtol=0, atol=1e-15)
    assert np.all((dense != 0).sum(axis=0) == s)
    # one sign per column
    for j in range(m):
        col = dense[:, j]
        assert np.all(np.sign(col[col != 0]) == A.signs[j])


def test_inclusion_sign_and_correlation_frequencies():
    d, m, s, n = 100, 50, 10, 10_000
    p = s / d
    incl = np.zeros((d, m))
    plus = 0
    cross = 0.0  # eta_{0,0} * eta_{0,1}
    within_col = 0.0  # eta_{0,0} * eta_{1,0}
    for t in range(n):
        A = sample_matrix(d, m, s, SeedSpec(2024, t))
        eta = np.zeros((d, m), dtype=bool)
        eta[A.supports.ravel(), np.repeat(np.arange(m), s)] = True
        incl += eta
        plus += int(A.signs[0] == 1)
        cross += eta[0, 0] & eta[0, 1]
        within_col += eta[0, 0] & eta[1, 0]
    freq = incl / n
    se = math.sqrt(p * (1 - p) / n)
    # 5000 cells: allow the 3-SE band for a single cell and check the mean tightly
    assert within(freq[3, 7], p, n)
    assert abs(freq.mean() - p) < 1e-12  # exactly s of d rows per column
    assert np.mean(np.abs(freq - p) <= 4 * se) > 0.99
    assert within(plus / n, 0.5, n)
    assert within(cross / n, p * p, n)
    exact_within = s * (s - 1) / (d * (d - 1))
    assert within_col / n <= p * p + 3 * math.sqrt(p * p / n)
    assert within(within_col / n, exact_within, n)


def test_roundtrip(tmp_path):
    A = sample_matrix(300, 25, 17, SeedSpec(123, 9))
    path = tmp_path / "m.npz"
    save_matrix(A, path)
    B = load_matrix(path)
    assert A == B
    assert A.supports.tobytes() == B.supports.tobytes()
    assert A.signs.tobytes() == B.signs.tobytes()
    assert (B.master_seed, B.stream_id) == (123, 9)


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, header=np.frombuffer(b'{"format": "other", "version": 1}', dtype=np.uint8),
             supports=np.zeros((1, 1), np.int64), signs=np.ones(1, np.int8))
    with pytest.raises(DataError):
        load_matrix(path)


def test_matrix_is_immutable():
    A = sample_matrix(10, 3, 2, 0)
    with pytest.raises(ValueError):
        A.supports[0, 0] = 5


def test_scipy_view_matches_dense():
    A = sample_matrix(30, 12, 4, SeedSpec(5))
    assert np.array_equal(A.to_scipy().toarray(), A.to_dense())
