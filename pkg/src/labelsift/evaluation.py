"""Synthetic benchmarks and detection-quality metrics.

Provides Gaussian-blob datasets with known ground truth, label-flip injection
driven by a transition matrix, binary noisy/clean detection metrics, and the
class-vs-class blame matrix that summarizes where scoring mass went.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import EmbeddingDataset
from .errors import InputError, ValidationError
from .ranking import ScoreTable

_BLOBS_STREAM = 101
_NOISE_STREAM = 202

MASK_HEADER = "id\tflipped"


@dataclass(frozen=True)
class NoiseSpec:
    """How labels get corrupted: flip probability, destination distribution, seed."""

    rate: float
    transition: object = "uniform"  # "uniform" or a (C, C) row-stochastic matrix, zero diagonal
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValidationError(f"noise rate must be in [0, 1), got {self.rate}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")

    def matrix(self, n_classes: int) -> np.ndarray:
        if isinstance(self.transition, str):
            if self.transition != "uniform":
                raise ValidationError(f"unknown transition spec {self.transition!r}")
            t = np.full((n_classes, n_classes), 1.0 / (n_classes - 1))
            np.fill_diagonal(t, 0.0)
            return t
        t = np.asarray(self.transition, dtype=np.float64)
        if t.shape != (n_classes, n_classes):
            raise ValidationError(f"transition matrix must be {n_classes}x{n_classes}, got {t.shape}")
        if np.any(t < 0):
            raise ValidationError("transition matrix has negative entries")
        if np.any(np.diagonal(t) != 0):
            raise ValidationError("transition matrix must carry no self-transition mass")
        rows = t.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-9:
            raise ValidationError("transition matrix rows must sum to 1")
        return t


@dataclass
class NoiseReport:
    """Binary noisy/clean detection quality plus per-class error rates."""

    recall: float
    precision: float
    f1: float
    macro_f1: float
    per_class_error: np.ndarray  # (C,) NaN where a class has no instances
    avg_error_rate: float
    true_noise: int
    detected: int
    correctly_detected: int

    def to_kv(self) -> str:
        lines = [
            f"recall={self.recall!r}",
            f"precision={self.precision!r}",
            f"f1={self.f1!r}",
            f"macro_f1={self.macro_f1!r}",
            f"avg_error_rate={self.avg_error_rate!r}",
            f"true_noise={self.true_noise}",
            f"detected={self.detected}",
            f"correctly_detected={self.correctly_detected}",
        ]
        for c, err in enumerate(self.per_class_error):
            if not math.isnan(err):
                lines.append(f"error_rate_class_{c}={float(err)!r}")
        return "\n".join(lines) + "\n"

    def to_text(self, class_names=None) -> str:
        lines = [
            "label-noise detection report",
            f"  true noisy instances : {self.true_noise}",
            f"  flagged as noisy     : {self.detected}",
            f"  correctly flagged    : {self.correctly_detected}",
            f"  recall               : {self.recall:.4f}",
            f"  precision            : {self.precision:.4f}",
            f"  F1                   : {self.f1:.4f}",
            f"  macro-F1             : {self.macro_f1:.4f}",
            f"  avg class error rate : {self.avg_error_rate:.4f}",
        ]
        for c, err in enumerate(self.per_class_error):
            if math.isnan(err):
                continue
            name = class_names[c] if class_names else str(c)
            lines.append(f"    error rate [{name}]: {float(err):.4f}")
        return "\n".join(lines) + "\n"


def make_blobs(
    n_classes: int, per_class: int, dim: int, separation: float, seed: int
) -> EmbeddingDataset:
    """Isotropic unit-variance Gaussian clusters; labels are the generating cluster.

    Class centers sit on a circle in the first two dimensions with adjacent
    centers exactly `separation` apart, so no cluster is near the origin.
    """
    if n_classes < 2:
        raise ValidationError(f"need at least 2 classes, got {n_classes}")
    if per_class < 1:
        raise ValidationError(f"per_class must be >= 1, got {per_class}")
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    if not separation > 0:
        raise ValidationError(f"separation must be > 0, got {separation}")
    if seed < 0:
        raise ValidationError(f"seed must be >= 0, got {seed}")

    radius = separation / (2.0 * math.sin(math.pi / n_classes))
    centers = np.zeros((n_classes, dim))
    angles = 2.0 * math.pi * np.arange(n_classes) / n_classes
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)

    n = n_classes * per_class
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), per_class)
    rng = np.random.default_rng([seed, _BLOBS_STREAM])
    vectors = centers[labels] + rng.standard_normal((n, dim))
    width = max(6, len(str(n - 1)))
    ids = [f"b{i:0{width}d}" for i in range(n)]
    return EmbeddingDataset(
        ids=ids,
        vectors=vectors.astype(np.float32),
        labels=labels,
        class_names=[str(c) for c in range(n_classes)],
    )


def inject_noise(ds: EmbeddingDataset, spec: NoiseSpec) -> tuple[EmbeddingDataset, np.ndarray]:
    """Flip each label independently with probability spec.rate.

    Flip destinations are drawn from the transition row of the instance's true
    class (which never includes the class itself). Returns the corrupted
    dataset and the boolean mask of flipped instances; the input dataset keeps
    the true labels.
    """
    c = ds.n_classes
    if c < 2:
        raise ValidationError("cannot flip labels with fewer than 2 classes")
    t = spec.matrix(c)
    rng = np.random.default_rng([spec.seed, _NOISE_STREAM])
    mask = rng.random(ds.n_instances) < spec.rate
    labels = ds.labels.copy()
    for i in np.flatnonzero(mask):
        labels[i] = rng.choice(c, p=t[ds.labels[i]])
    noisy = EmbeddingDataset(
        ids=list(ds.ids),
        vectors=ds.vectors.copy(),
        labels=labels,
        class_names=list(ds.class_names),
    )
    return noisy, mask


def _f1(precision: float, recall: float) -> float:
    return 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def _recount_naive(pred_noisy, mask, given_labels):
    """Plain-Python double-entry recount of the confusion counts and class errors."""
    tp = fp = fn = tn = 0
    per_class_wrong: dict[int, int] = {}
    per_class_total: dict[int, int] = {}
    for p, m, g in zip(pred_noisy, mask, given_labels):
        p, m, g = bool(p), bool(m), int(g)
        if p and m:
            tp += 1
        elif p and not m:
            fp += 1
        elif not p and m:
            fn += 1
        else:
            tn += 1
        per_class_total[g] = per_class_total.get(g, 0) + 1
        if p != m:
            per_class_wrong[g] = per_class_wrong.get(g, 0) + 1
    errors = {g: per_class_wrong.get(g, 0) / t for g, t in per_class_total.items()}
    return tp, fp, fn, tn, errors


def detection_metrics(table: ScoreTable, mask, given_labels=None) -> NoiseReport:
    """Score a keep/remove decision against ground-truth flip flags.

    keep=False counts as "predicted noisy". Per-class error rates group by the
    GIVEN label and average over classes that have instances.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        raise ValidationError("empty noise mask")
    if mask.shape != (table.n_instances,):
        raise ValidationError(
            f"mask length {mask.shape[0]} does not match table size {table.n_instances}"
        )
    given = table.labels if given_labels is None else np.asarray(given_labels, dtype=np.int64)
    if given.shape != (table.n_instances,):
        raise ValidationError("given_labels length does not match table size")

    pred_noisy = ~table.keep
    tp = int(np.sum(pred_noisy & mask))
    fp = int(np.sum(pred_noisy & ~mask))
    fn = int(np.sum(~pred_noisy & mask))
    tn = int(np.sum(~pred_noisy & ~mask))

    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    f1 = _f1(precision, recall)
    recall_clean = tn / (tn + fp) if tn + fp > 0 else 1.0
    precision_clean = tn / (tn + fn) if tn + fn > 0 else 1.0
    macro_f1 = 0.5 * (f1 + _f1(precision_clean, recall_clean))

    n_classes = int(given.max()) + 1
    wrong = pred_noisy != mask
    per_class = np.full(n_classes, np.nan)
    for c in range(n_classes):
        sel = given == c
        if sel.any():
            per_class[c] = float(np.mean(wrong[sel]))
    avg_error = float(np.nanmean(per_class))

    # double-entry check against an independent plain recount
    r_tp, r_fp, r_fn, r_tn, r_err = _recount_naive(pred_noisy, mask, given)
    assert (tp, fp, fn, tn) == (r_tp, r_fp, r_fn, r_tn)
    for c, err in r_err.items():
        assert abs(per_class[c] - err) < 1e-12

    return NoiseReport(
        recall=recall,
        precision=precision,
        f1=f1,
        macro_f1=macro_f1,
        per_class_error=per_class,
        avg_error_rate=avg_error,
        true_noise=tp + fn,
        detected=tp + fp,
        correctly_detected=tp,
    )


def blame_matrix(table: ScoreTable, labels=None, n_classes: int | None = None) -> np.ndarray:
    """Column-normalized magnitude of scoring mass between class pairs.

    Entry (a, b) sums |contribution| over ledger pairs whose prototype carries
    given label a and whose instance carries given label b; each column is then
    normalized to sum 1 (all-zero columns stay zero).
    """
    if not table.has_ledger:
        raise ValidationError("score table has no evidence ledger")
    labels = table.labels if labels is None else np.asarray(labels, dtype=np.int64)
    c = n_classes if n_classes is not None else int(labels.max()) + 1
    m = np.zeros((c, c), dtype=np.float64)
    np.add.at(
        m,
        (labels[table.ledger_prototype], labels[table.ledger_instance]),
        np.abs(table.ledger_contribution),
    )
    sums = m.sum(axis=0)
    nonzero = sums > 0
    m[:, nonzero] /= sums[nonzero]
    return m


def write_mask_file(path, ids, mask) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(MASK_HEADER + "\n")
        for i, flag in zip(ids, mask):
            f.write(f"{i}\t{int(flag)}\n")


def read_mask_file(path) -> dict[str, bool]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"mask file not found: {path}")
    out: dict[str, bool] = {}
    with open(path, encoding="utf-8", newline="") as f:
        header = f.readline().rstrip("\r\n")
        if header != MASK_HEADER:
            raise InputError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("0", "1"):
                raise InputError(f"{path}:{lineno}: expected id<TAB>0|1")
            out[parts[0]] = parts[1] == "1"
    if not out:
        raise InputError(f"{path}: no data rows")
    return out


def write_blame_matrix(path, matrix: np.ndarray, class_names) -> None:
    c = matrix.shape[0]
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("prototype_class\t" + "\t".join(class_names) + "\n")
        for a in range(c):
            cells = "\t".join(repr(float(v)) for v in matrix[a])
            f.write(f"{class_names[a]}\t{cells}\n")


def write_transition_file(path, matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for row in np.asarray(matrix, dtype=np.float64):
            f.write("\t".join(repr(float(v)) for v in row) + "\n")


def read_transition_file(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"transition file not found: {path}")
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        for line in f:
            line = line.rstrip("\r\n")
            if not line:
                continue
            rows.append([float(v) for v in line.split("\t")])
    if not rows or any(len(r) != len(rows) for r in rows):
        raise InputError(f"{path}: transition matrix must be square")
    return np.asarray(rows, dtype=np.float64)
