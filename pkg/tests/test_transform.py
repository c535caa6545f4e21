import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sscjl.errors import DataError, NormalizationError, ShapeError
from sscjl.params import compute_parameters
from sscjl.sampler import SeedSpec, sample_matrix
from sscjl.transform import (
    VectorBatch,
    apply,
    apply_batch,
    distortion_energy,
    gram_overlap,
    overlap_counts,
    pairwise_distortion,
    quadratic_form_direct,
    read_vectors,
    write_vectors,
)

from conftest import unit


def basis(m, j):
    e = np.zeros(m)
    e[j] = 1.0
    return e


def test_basis_vector_image():
    A = sample_matrix(40, 10, 6, SeedSpec(1))
    for j in range(10):
        y = apply(A, basis(10, j))
        assert np.count_nonzero(y) == 6
        assert np.allclose(np.abs(y[y != 0]), 1 / math.sqrt(6))
        assert np.dot(y, y) == pytest.approx(1.0, abs=1e-12)
        assert distortion_energy(A, basis(10, j)) == pytest.approx(0.0, abs=1e-12)
        assert quadratic_form_direct(A, basis(10, j)) == 0.0


def test_zero_maps_to_zero():
    A = sample_matrix(20, 5, 3, SeedSpec(2))
    assert np.array_equal(apply(A, np.zeros(5)), np.zeros(20))


def test_matches_dense_oracle(rng):
    for trial in range(50):
        d = int(rng.integers(1, 65))
        m = int(rng.integers(1, 33))
        s = int(rng.integers(1, d + 1))
        A = sample_matrix(d, m, s, SeedSpec(trial))
        x = rng.standard_normal(m)
        expected = A.to_dense() @ x
        np.testing.assert_allclose(apply(A, x), expected, rtol=1e-12, atol=1e-12 * np.abs(x).sum())
        np.testing.assert_allclose(apply_batch(A, x[None, :])[0], expected, rtol=1e-12, atol=1e-13)


def test_input_errors():
    A = sample_matrix(10, 4, 2, SeedSpec(3))
    with pytest.raises(ShapeError):
        apply(A, np.ones(3))
    with pytest.raises(DataError):
        apply(A, np.array([1.0, np.nan, 0, 0]))
    with pytest.raises(NormalizationError):
        distortion_energy(A, np.ones(4))
    with pytest.raises(NormalizationError):
        quadratic_form_direct(A, np.ones(4))


def test_dense_columns_closed_form(rng):
    d, m = 6, 5
    A = sample_matrix(d, m, d, SeedSpec(4))
    for _ in range(10):
        x = unit(rng.standard_normal(m))
        expected = float(np.dot(A.signs, x)) ** 2 - 1.0
        assert distortion_energy(A, x) == pytest.approx(expected, abs=1e-12)
        assert all(gram_overlap(A, j, k) == 1.0 for j in range(m) for k in range(m))


def test_overlap_basic():
    A = sample_matrix(30, 8, 5, SeedSpec(5))
    for j in range(8):
        assert gram_overlap(A, j, j) == 1.0
        for k in range(8):
            q = gram_overlap(A, j, k)
            assert q == gram_overlap(A, k, j)
            assert 0.0 <= q <= 1.0
            assert q == len(set(A.supports[j]) & set(A.supports[k])) / 5
    with pytest.raises(ShapeError):
        gram_overlap(A, 0, 8)


def test_disjoint_supports_have_zero_overlap():
    from sscjl.sampler import SSCMatrix

    A = SSCMatrix(d=4, m=2, s=2, supports=np.array([[0, 1], [2, 3]]), signs=np.array([1, -1], np.int8))
    assert gram_overlap(A, 0, 1) == 0.0


def test_hypergeometric_overlap_law_d4_s2():
    # exhaustive enumeration of all support pairs
    subsets = list(itertools.combinations(range(4), 2))
    law = {}
    for a in subsets:
        for b in subsets:
            o = len(set(a) & set(b))
            law[o] = law.get(o, 0) + Fraction(1, 36)
    assert law == {0: Fraction(1, 6), 1: Fraction(2, 3), 2: Fraction(1, 6)}
    assert sum(Fraction(o, 2) * p for o, p in law.items()) == Fraction(1, 2)
    assert sum(Fraction(o, 2) ** 2 * p for o, p in law.items()) == Fraction(1, 3)


def test_batched_overlap_counts_match_gram_overlap():
    A = sample_matrix(25, 40, 6, SeedSpec(6))
    counts = overlap_counts(A.supports[0::2], A.supports[1::2])
    for k, c in enumerate(counts):
        assert c / 6 == gram_overlap(A, 2 * k, 2 * k + 1)


def test_single_column_form_is_empty():
    A = sample_matrix(10, 1, 3, SeedSpec(7))
    assert quadratic_form_direct(A, np.array([1.0])) == 0.0
    assert distortion_energy(A, np.array([-1.0])) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=120, deadline=None)
@given(d=st.integers(1, 64), m=st.integers(1, 32), data=st.data(), seed=st.integers(0, 2**32))
def test_reduction_identity(d, m, data, seed):
    s = data.draw(st.integers(1, d))
    A = sample_matrix(d, m, s, SeedSpec(seed))
    x = unit(np.random.default_rng(seed).standard_normal(m))
    direct = quadratic_form_direct(A, x)
    energy = distortion_energy(A, x)
    assert energy == pytest.approx(direct, rel=1e-9, abs=1e-12)
    # sign invariance is exact
    assert distortion_energy(A, -x) == energy


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_linearity(seed, a, b):
    A = sample_matrix(40, 12, 5, SeedSpec(seed))
    g = np.random.default_rng(seed)
    x, y = g.standard_normal(12), g.standard_normal(12)
    lhs = apply(A, a * x + b * y)
    rhs = a * apply(A, x) + b * apply(A, y)
    scale = max(1.0, np.abs(rhs).max())
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale


def test_pairwise_identical_vectors_skipped():
    A = sample_matrix(20, 4, 3, SeedSpec(8))
    res = pairwise_distortion(A, VectorBatch(np.ones((5, 4))))
    assert res.n_pairs == 0 and res.n_skipped == 10


def test_pairwise_zero_and_basis():
    A = sample_matrix(20, 4, 3, SeedSpec(8))
    res = pairwise_distortion(A, VectorBatch(np.vstack([np.zeros(4), basis(4, 2)])))
    assert res.n_pairs == 1
    assert res.min_ratio == pytest.approx(1.0, abs=1e-12)
    assert res.max_ratio == pytest.approx(1.0, abs=1e-12)


def test_pairwise_headline_parameters():
    # measured per-pair failure rate at these parameters is 0/2000 (see the
    # distributional check), so all 190 pairs should stay within 1 +- 0.5
    params = compute_parameters(0.5, 0.1)
    g = np.random.default_rng(99)
    for seed in range(3):
        batch = VectorBatch(g.standard_normal((20, 100)))
        A = sample_matrix(params.d, 100, params.s, SeedSpec(seed))
        res = pairwise_distortion(A, batch)
        assert res.n_pairs == 190
        assert res.max_abs_deviation <= 0.5
        assert sum(res.hist_counts) == 190


def test_read_vectors(tmp_path):
    p = tmp_path / "v.csv"
    p.write_text("a,1,2,3\n\nb,4,5,6\n")
    batch = read_vectors(p, labeled=True)
    assert batch.labels == ["a", "b"]
    assert batch.vectors.tolist() == [[1, 2, 3], [4, 5, 6]]
    p.write_text("1;2\n3;4\n")
    assert read_vectors(p, delimiter=";").m == 2


@pytest.mark.parametrize("text,line", [("1,2\n3\n", 2), ("1,2\n3,nan\n", 2), ("1,x\n", 1), ("", None)])
def test_read_vectors_rejects(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataError) as exc:
        read_vectors(p)
    assert exc.value.line == line


def test_write_read_roundtrip(tmp_path):
    X = np.random.default_rng(0).standard_normal((4, 3))
    p = tmp_path / "o.csv"
    write_vectors(p, X, ["r0", "r1", "r2", "r3"])
    back = read_vectors(p, labeled=True)
    assert np.array_equal(back.vectors, X)
