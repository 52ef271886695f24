"""Per-class representative-instance selection.

Each class is clustered with K-means (k-means++ seeding, Lloyd updates) and
every centroid is mapped back to the nearest instance of that class, so a
prototype is always an actual dataset row carrying its given label.

Determinism contract: class members are processed in id-sorted order and each
class draws from its own RNG stream keyed by (seed, class name), so the same
dataset yields the same prototypes regardless of row order or of which other
classes exist.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingDataset
from .errors import ValidationError

POLICIES = ("kmeans", "random")

_KMEANS_MAX_ITER = 100
_KMEANS_TOL = 1e-6


@dataclass
class PrototypeSet:
    """Selected prototype row indices plus the per-class tally."""

    indices: np.ndarray  # int64, unique
    per_class_count: dict[int, int]

    def __len__(self) -> int:
        return len(self.indices)


def prototype_count(rho: float) -> int:
    """Prototypes per class for an average class size rho: floor(sqrt(rho/2)), at least 1."""
    if rho < 0:
        raise ValidationError(f"rho must be >= 0, got {rho}")
    return max(1, math.floor(math.sqrt(rho / 2.0)))


def _class_rng(seed: int, class_name: str) -> np.random.Generator:
    digest = hashlib.sha256(class_name.encode("utf-8")).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big")])


def _sq_distances(x: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = x - center
    return np.einsum("ij,ij->i", diff, diff)


def _kmeans_pp_init(x: np.ndarray, q: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((q, x.shape[1]), dtype=np.float64)
    centers[0] = x[int(rng.integers(n))]
    d2 = _sq_distances(x, centers[0])
    for t in range(1, q):
        total = d2.sum()
        if total <= 0:  # every point coincides with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[t] = x[idx]
        np.minimum(d2, _sq_distances(x, centers[t]), out=d2)
    return centers


def _kmeans(x: np.ndarray, q: int, rng: np.random.Generator) -> np.ndarray:
    """Lloyd iterations with k-means++ seeding; returns final centroids."""
    n = x.shape[0]
    centers = _kmeans_pp_init(x, q, rng)
    d2 = np.empty((n, q), dtype=np.float64)
    for _ in range(_KMEANS_MAX_ITER):
        for c in range(q):
            d2[:, c] = _sq_distances(x, centers[c])
        assign = d2.argmin(axis=1)
        new_centers = np.empty_like(centers)
        own_d2 = d2[np.arange(n), assign].copy()
        for c in range(q):
            members = assign == c
            if not members.any():
                # reseed an empty cluster with the point farthest from its centroid
                far = int(own_d2.argmax())
                new_centers[c] = x[far]
                assign[far] = c
                own_d2[far] = -np.inf
            else:
                new_centers[c] = x[members].mean(axis=0)
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < _KMEANS_TOL:
            break
    return centers


def select_prototypes(
    ds: EmbeddingDataset,
    seed: int,
    count_override: int | None = None,
    policy: str = "kmeans",
) -> PrototypeSet:
    """Pick per-class prototypes.

    The per-class cluster count q is min(prototype_count(N/C), class size),
    or min(count_override, class size) when an override is given. Duplicate
    picks (centroids collapsing onto the same instance) are deduplicated.
    """
    if policy not in POLICIES:
        raise ValidationError(f"unknown prototype policy {policy!r}, expected one of {POLICIES}")
    if count_override is not None and count_override < 1:
        raise ValidationError(f"count_override must be >= 1, got {count_override}")
    if seed < 0:
        raise ValidationError(f"seed must be >= 0, got {seed}")

    rho = ds.n_instances / ds.n_classes
    count = count_override if count_override is not None else prototype_count(rho)
    ids_arr = np.asarray(ds.ids, dtype=str)

    chosen: list[int] = []
    per_class: dict[int, int] = {}
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if members.size == 0:
            continue
        members = members[np.argsort(ids_arr[members])]  # canonical order
        q = min(count, members.size)
        rng = _class_rng(seed, ds.class_names[c])
        if policy == "random":
            picks = members[np.sort(rng.choice(members.size, size=q, replace=False))]
            selected = list(dict.fromkeys(int(p) for p in picks))
        else:
            x = ds.vectors[members].astype(np.float64)
            centers = _kmeans(x, q, rng)
            selected = []
            for center in centers:
                local = int(_sq_distances(x, center).argmin())  # first win = smallest id
                selected.append(int(members[local]))
            selected = list(dict.fromkeys(selected))
        chosen.extend(selected)
        per_class[c] = len(selected)

    if not chosen:
        raise ValidationError("no prototypes selected (empty dataset)")
    return PrototypeSet(indices=np.asarray(chosen, dtype=np.int64), per_class_count=per_class)


def write_prototypes_file(path, protos: PrototypeSet, ds: EmbeddingDataset) -> None:
    """Audit TSV `class<TAB>prototype_id`, sorted by (class name, id)."""
    rows = sorted(
        (ds.class_names[int(ds.labels[i])], ds.ids[int(i)]) for i in protos.indices
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        for name, pid in rows:
            f.write(f"{name}\t{pid}\n")
