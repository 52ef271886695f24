import math

import numpy as np
import pytest

from labelsift import EmbeddingDataset, KernelParams, ValidationError, distance, kernel, knn
from conftest import random_dataset
from oracles import knn_oracle


def line_dataset(points, labels=None):
    n = len(points)
    return EmbeddingDataset(
        ids=[f"p{i}" for i in range(n)],
        vectors=np.array(points, dtype=np.float32).reshape(n, -1),
        labels=np.array(labels if labels is not None else [i % 2 for i in range(n)]),
    )


class TestDistance:
    def test_three_four_five(self):
        assert distance([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)

    def test_identity(self):
        assert distance([1.5, -2.0], [1.5, -2.0]) == 0.0

    def test_sqrt_two(self):
        assert distance([1.0, 1.0], [2.0, 2.0]) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(ValidationError, match="dimension mismatch"):
            distance([1.0], [1.0, 2.0])

    def test_symmetry_and_triangle(self, rng):
        for _ in range(200):
            a, b, c = rng.standard_normal((3, 5))
            assert distance(a, b) == distance(b, a)
            assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


class TestKernel:
    def test_at_zero(self):
        assert kernel(0.0, KernelParams(bias=1.0, exponent=1.0)) == 1.0

    def test_unit_distance(self):
        assert kernel(1.0, KernelParams(bias=1.0, exponent=1.0)) == 0.5

    def test_squared_exponent(self):
        assert kernel(2.0, KernelParams(bias=1.0, exponent=2.0)) == pytest.approx(0.2)

    def test_monotone_decreasing_random_params(self, rng):
        for _ in range(200):
            p = KernelParams(
                bias=float(rng.uniform(0.01, 5.0)), exponent=float(rng.uniform(0.1, 4.0))
            )
            d1, d2 = sorted(rng.uniform(0.0, 10.0, size=2))
            if d1 == d2:
                continue
            assert kernel(d1, p) > kernel(d2, p)

    def test_bounded_by_inverse_bias(self, rng):
        p = KernelParams(bias=0.7, exponent=1.3)
        d = rng.uniform(0, 100, size=1000)
        vals = kernel(d, p)
        assert np.all(vals > 0) and np.all(vals <= 1 / 0.7 + 1e-15)

    def test_param_validation(self):
        with pytest.raises(ValidationError):
            KernelParams(bias=0.0)
        with pytest.raises(ValidationError):
            KernelParams(exponent=-1.0)
        with pytest.raises(ValidationError):
            kernel(-0.1, KernelParams())


class TestKnn:
    def test_forced_geometry(self):
        ds = line_dataset([0.0, 1.0, 10.0])
        (res,) = knn(ds, [0], k=1)
        assert res.pairs() == [(1, 1.0)]

    def test_clamped_to_n_minus_one(self):
        ds = line_dataset([0.0, 1.0, 10.0])
        (res,) = knn(ds, [0], k=5)
        assert len(res) == 2

    def test_k_below_one(self):
        ds = line_dataset([0.0, 1.0])
        with pytest.raises(ValidationError, match="k must be"):
            knn(ds, [0], k=0)

    def test_self_excluded(self, rng):
        ds = random_dataset(rng, 30, 2, 3)
        for nb in knn(ds, range(30), k=29):
            assert nb.query_index not in nb.indices
            assert len(nb) == 29

    def test_matches_oracle_50_points(self, rng):
        ds = random_dataset(rng, 50, 3, 4)
        vectors = ds.vectors.astype(np.float64).tolist()
        for nb in knn(ds, range(50), k=7):
            expected = knn_oracle(vectors, nb.query_index, 7)
            assert [int(i) for i in nb.indices] == [i for i, _ in expected]
            assert np.allclose(nb.distances, [d for _, d in expected], atol=1e-12)

    def test_tie_break_smaller_index(self):
        # rows 1 and 2 are equidistant from row 0
        ds = line_dataset([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [5.0, 5.0]])
        (res,) = knn(ds, [0], k=3)
        assert list(res.indices) == [1, 2, 3]

    def test_permutation_invariance_in_ids(self, rng):
        ds = random_dataset(rng, 40, 3, 5)
        perm = rng.permutation(40)
        permuted = EmbeddingDataset(
            ids=[ds.ids[int(r)] for r in perm],
            vectors=ds.vectors[perm],
            labels=ds.labels[perm],
            class_names=ds.class_names,
        )
        where = {ds.ids[int(r)]: pos for pos, r in enumerate(perm)}
        for q in range(10):
            (orig,) = knn(ds, [q], k=6)
            (moved,) = knn(permuted, [where[ds.ids[q]]], k=6)
            assert [ds.ids[int(i)] for i in orig.indices] == [
                permuted.ids[int(i)] for i in moved.indices
            ]

    def test_parallel_identical_to_sequential(self, rng):
        ds = random_dataset(rng, 120, 4, 6)
        seq = knn(ds, range(120), k=9, n_jobs=1)
        par = knn(ds, range(120), k=9, n_jobs=4)
        for a, b in zip(seq, par):
            assert a.query_index == b.query_index
            assert np.array_equal(a.indices, b.indices)
            assert np.array_equal(a.distances, b.distances)
