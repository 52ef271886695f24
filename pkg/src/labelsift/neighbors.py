"""Exact Euclidean k-nearest-neighbor search and the inverse-distance kernel.

Search is brute force and exact by contract. All distance arithmetic runs in
float64 on a per-pair basis, so results do not depend on row order or on how
queries are batched across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingDataset
from .errors import ValidationError


@dataclass(frozen=True)
class KernelParams:
    """Parameters of the vote/score weight kernel scale / (bias + d**exponent).

    `scale` is a rank-preserving multiplier (default 1, mainly useful for
    invariance checks); bias keeps the kernel finite at d = 0.
    """

    bias: float = 1.0
    exponent: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.bias > 0:
            raise ValidationError(f"kernel bias must be > 0, got {self.bias}")
        if not self.exponent > 0:
            raise ValidationError(f"kernel exponent must be > 0, got {self.exponent}")
        if not self.scale > 0:
            raise ValidationError(f"kernel scale must be > 0, got {self.scale}")


@dataclass
class NeighborList:
    """Nearest neighbors of one query row, ascending by (distance, index)."""

    query_index: int
    indices: np.ndarray  # (k,) int64
    distances: np.ndarray  # (k,) float64

    def __len__(self) -> int:
        return len(self.indices)

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(d)) for i, d in zip(self.indices, self.distances)]


def distance(a, b) -> float:
    """Euclidean distance between two vectors of equal dimension."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.dot(diff, diff)))


def kernel(d, p: KernelParams):
    """Weight of a neighbor at distance d: scale / (bias + d**exponent).

    Accepts a scalar or an array; strictly decreasing in d, bounded by
    scale/bias at d = 0.
    """
    arr = np.asarray(d, dtype=np.float64)
    if np.any(arr < 0):
        raise ValidationError("distances must be non-negative")
    out = p.scale / (p.bias + arr**p.exponent)
    return float(out) if np.isscalar(d) or arr.ndim == 0 else out


def _distances_from_row(x: np.ndarray, row: int) -> np.ndarray:
    diff = x - x[row]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def distances_to_rows(ds: EmbeddingDataset, rows) -> np.ndarray:
    """Dense (N, len(rows)) matrix of distances from every instance to each anchor row."""
    x = ds.vectors.astype(np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    out = np.empty((x.shape[0], rows.size), dtype=np.float64)
    for j, r in enumerate(rows):
        out[:, j] = _distances_from_row(x, int(r))
    return out


def _neighbors_of(x: np.ndarray, q: int, k: int) -> NeighborList:
    n = x.shape[0]
    d = _distances_from_row(x, q)
    d[q] = np.inf  # a query is never its own neighbor
    order = np.lexsort((np.arange(n), d))[: min(k, n - 1)]
    return NeighborList(query_index=q, indices=order, distances=d[order])


def knn(ds: EmbeddingDataset, queries, k: int, n_jobs: int = 1) -> list[NeighborList]:
    """Exact k nearest neighbors for each query row index.

    Ties on distance go to the smaller row index; each query excludes itself;
    result length is min(k, N-1). Parallel execution over queries returns the
    same lists as sequential execution.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    queries = [int(q) for q in queries]
    n = ds.n_instances
    if n < 1:
        raise ValidationError("empty dataset")
    for q in queries:
        if not 0 <= q < n:
            raise ValidationError(f"query index {q} out of range [0, {n})")
    x = ds.vectors.astype(np.float64)
    if n_jobs <= 1 or len(queries) < 2:
        return [_neighbors_of(x, q, k) for q in queries]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda q: _neighbors_of(x, q, k), queries))
