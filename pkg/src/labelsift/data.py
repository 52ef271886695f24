"""Dataset container and bit-exact file formats.

Embedding file layout (little-endian): magic ``NRK1``, uint32 N, uint32 m,
then N*m float32 values row-major. Labels travel separately in a UTF-8 TSV
(``id<TAB>label``), one row per embedding row, in the same order.
"""

from __future__ import annotations

import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ValidationError

MAGIC = b"NRK1"
_HEADER = struct.Struct("<4sII")
_INT_TOKEN = re.compile(r"^(0|[1-9][0-9]*)$")


@dataclass
class EmbeddingDataset:
    """Labeled embedding matrix: one id, one vector row, one class index per instance."""

    ids: list[str]
    vectors: np.ndarray  # (N, m) float32
    labels: np.ndarray  # (N,) int64, values in [0, n_classes)
    class_names: list[str] | None = None

    def __post_init__(self):
        self.ids = [str(i) for i in self.ids]
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2:
            raise ValidationError("vectors must be a 2-D matrix")
        n = self.vectors.shape[0]
        if n < 1:
            raise ValidationError("dataset is empty")
        if len(self.ids) != n or self.labels.shape != (n,):
            raise ValidationError(
                f"ids/vectors/labels disagree on N: {len(self.ids)}/{n}/{self.labels.shape[0]}"
            )
        bad = ~np.isfinite(self.vectors)
        if bad.any():
            row = int(np.argwhere(bad)[0, 0])
            raise ValidationError(f"non-finite vector component at row {row}")
        if len(set(self.ids)) != n:
            dup = next(i for i, c in Counter(self.ids).items() if c > 1)
            raise ValidationError(f"duplicate id {dup!r}")
        if n and int(self.labels.min()) < 0:
            raise ValidationError("negative class index")
        observed = int(self.labels.max()) + 1
        if self.class_names is None:
            self.class_names = [str(v) for v in range(observed)]
        else:
            self.class_names = [str(c) for c in self.class_names]
            if len(self.class_names) < observed:
                raise ValidationError(
                    f"labels reference class {observed - 1} but only "
                    f"{len(self.class_names)} class names are declared"
                )
        if self.n_classes < 2:
            raise ValidationError("at least 2 classes are required")

    @property
    def n_instances(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_features(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def label_name(self, index: int) -> str:
        return self.class_names[int(self.labels[index])]

    def subset(self, rows) -> "EmbeddingDataset":
        """New dataset restricted to the given row indices, order preserved."""
        rows = np.asarray(rows, dtype=np.int64)
        return EmbeddingDataset(
            ids=[self.ids[int(r)] for r in rows],
            vectors=self.vectors[rows].copy(),
            labels=self.labels[rows].copy(),
            class_names=list(self.class_names),
        )


def _densify_labels(tokens: list[str]) -> tuple[np.ndarray, list[str]]:
    """Map label tokens to dense class indices.

    Canonical integer tokens covering {0..max} are used as-is; anything else
    is densified in first-appearance order.
    """
    if all(_INT_TOKEN.match(t) for t in tokens):
        values = [int(t) for t in tokens]
        hi = max(values)
        if set(values) == set(range(hi + 1)):
            return np.asarray(values, dtype=np.int64), [str(v) for v in range(hi + 1)]
    mapping: dict[str, int] = {}
    out = np.empty(len(tokens), dtype=np.int64)
    for i, t in enumerate(tokens):
        if t not in mapping:
            mapping[t] = len(mapping)
        out[i] = mapping[t]
    return out, list(mapping)


def read_embedding_file(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"embedding file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise InputError(f"{path}: truncated header")
    magic, n, m = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if n < 1 or m < 1:
        raise InputError(f"{path}: header declares empty matrix ({n}x{m})")
    expected = _HEADER.size + 4 * n * m
    if len(raw) != expected:
        raise InputError(
            f"{path}: payload is {len(raw) - _HEADER.size} bytes, header implies {4 * n * m}"
        )
    vectors = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, m)
    return vectors.copy()


def write_embedding_file(path, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
        raise ValidationError("vectors must be a nonempty 2-D matrix")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, vectors.shape[0], vectors.shape[1]))
        f.write(vectors.tobytes())


def read_label_file(path) -> tuple[list[str], list[str]]:
    """Return (ids, label tokens) from a two-column TSV."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"label file not found: {path}")
    ids: list[str] = []
    tokens: list[str] = []
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected id<TAB>label, got {line!r}")
            if not parts[0] or not parts[1]:
                raise InputError(f"{path}:{lineno}: empty id or label")
            ids.append(parts[0])
            tokens.append(parts[1])
    return ids, tokens


def write_label_file(path, ids, names) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for i, name in zip(ids, names):
            f.write(f"{i}\t{name}\n")


def load_dataset(embedding_path, label_path) -> EmbeddingDataset:
    """Load and validate an embedding matrix plus its label file."""
    vectors = read_embedding_file(embedding_path)
    ids, tokens = read_label_file(label_path)
    if len(ids) != vectors.shape[0]:
        raise InputError(
            f"row count mismatch: {len(ids)} label rows for {vectors.shape[0]} embedding rows"
        )
    labels, class_names = _densify_labels(tokens)
    return EmbeddingDataset(ids=ids, vectors=vectors, labels=labels, class_names=class_names)


def save_dataset(ds: EmbeddingDataset, embedding_path, label_path) -> None:
    """Persist a dataset in the binary + TSV formats accepted by load_dataset."""
    write_embedding_file(embedding_path, ds.vectors)
    write_label_file(label_path, ds.ids, (ds.class_names[v] for v in ds.labels))


def l2_normalize(ds: EmbeddingDataset) -> EmbeddingDataset:
    """Rescale every row to unit Euclidean norm; ids and labels unchanged."""
    v = ds.vectors.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", v, v))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"zero-norm row {int(zero[0])}")
    return EmbeddingDataset(
        ids=list(ds.ids),
        vectors=(v / norms[:, None]).astype(np.float32),
        labels=ds.labels.copy(),
        class_names=list(ds.class_names),
    )


def write_label_map(path, class_names) -> None:
    """Emit the class-index -> label-token mapping used by a run."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        for i, name in enumerate(class_names):
            f.write(f"{i}\t{name}\n")


def read_label_map(path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"label map not found: {path}")
    names: dict[int, str] = {}
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected index<TAB>label")
            names[int(parts[0])] = parts[1]
    if set(names) != set(range(len(names))):
        raise InputError(f"{path}: class indices are not contiguous from 0")
    return [names[i] for i in range(len(names))]


def write_id_list(path, ids) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for i in ids:
            f.write(f"{i}\n")


def read_id_list(path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"id list not found: {path}")
    with open(path, encoding="utf-8", newline="") as f:
        return [line.rstrip("\r\n") for line in f if line.rstrip("\r\n")]
