"""Blame/reward scoring core.

Every prototype predicts its own label from a weighted vote of its k nearest
neighbors. Each (instance, prototype) pair is then classified into one of four
agreement patterns between the instance's given label, the prototype's given
label, and the prototype's predicted label, and the instance accumulates the
pattern weight times the pair kernel. High accumulated score means "likely
mislabeled"; an instance is dropped when its score strictly exceeds delta.

Determinism contract: the evidence ledger is kept sorted by (instance id,
prototype id) and final scores are summed in that order, so output files are
byte-identical across runs, row permutations, and worker counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import EmbeddingDataset, _densify_labels
from .errors import EmptyResultError, InputError, NotFoundError, ValidationError
from .neighbors import KernelParams, NeighborList, distances_to_rows, kernel, knn
from .prototypes import PrototypeSet

CLIQUE_TYPES = ("c11", "c10", "c01", "c00")
_CLIQUE_CODE = {t: i for i, t in enumerate(CLIQUE_TYPES)}

CLIQUE_SCOPES = ("votes", "nearest_prototypes")

SCORE_HEADER = "rank\tid\tgiven_label\tscore\tkeep"
LEDGER_HEADER = "instance_id\tprototype_id\tclique\tcontribution"


@dataclass(frozen=True)
class RankParams:
    """All scoring hyperparameters."""

    k: int = 50
    alpha: float = 0.5
    blame_factor: float = 1.0
    kernel: KernelParams = field(default_factory=KernelParams)
    delta: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if not 0.5 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in [0.5, 1], got {self.alpha}")
        if not self.blame_factor >= 1.0:
            raise ValidationError(f"blame_factor must be >= 1, got {self.blame_factor}")
        if not self.delta >= 0.0:
            raise ValidationError(f"delta must be >= 0, got {self.delta}")


@dataclass
class PrototypePrediction:
    """A prototype's weighted-kNN label vote."""

    prototype_index: int
    predicted_label: int
    vote_mass: np.ndarray  # (C,) kernel-weight sum per class
    neighbors: NeighborList


@dataclass
class EvidenceEntry:
    prototype_id: str
    clique: str
    contribution: float


@dataclass
class Explanation:
    instance_id: str
    score: float
    rank: int
    keep: bool
    entries: list[EvidenceEntry]


@dataclass
class ScoreTable:
    """Per-instance scores, ranks, keep flags, and the evidence ledger behind them."""

    ids: list[str]
    labels: np.ndarray  # (N,) int64 given labels
    class_names: list[str]
    scores: np.ndarray  # (N,) float64
    ranks: np.ndarray  # (N,) int64, 1 = most suspect
    keep: np.ndarray  # (N,) bool, False = remove
    delta: float
    ledger_instance: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    ledger_prototype: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    ledger_clique: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))
    ledger_contribution: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    @property
    def n_instances(self) -> int:
        return len(self.ids)

    @property
    def has_ledger(self) -> bool:
        return self.ledger_instance.size > 0

    def index_of(self, instance_id: str) -> int:
        try:
            return self.ids.index(instance_id)
        except ValueError:
            raise NotFoundError(f"id {instance_id!r} not found") from None

    def validate(self) -> None:
        n = self.n_instances
        if sorted(self.ranks) != list(range(1, n + 1)):
            raise ValidationError("ranks are not a permutation of 1..N")
        if self.has_ledger:
            sums = np.zeros(n, dtype=np.float64)
            np.add.at(sums, self.ledger_instance, self.ledger_contribution)
            if np.abs(sums - self.scores).max() > 1e-9:
                raise ValidationError("scores do not match evidence ledger sums")

    @classmethod
    def from_scores(cls, ids, labels, class_names, scores, delta: float) -> "ScoreTable":
        """Build a table (empty ledger) from precomputed scores."""
        ids = [str(i) for i in ids]
        labels = np.asarray(labels, dtype=np.int64)
        scores = np.asarray(scores, dtype=np.float64)
        ranks, keep = _rank_and_keep(ids, scores, delta)
        return cls(ids, labels, list(class_names), scores, ranks, keep, float(delta))


def _rank_and_keep(ids, scores, delta):
    ids_arr = np.asarray(ids, dtype=str)
    order = np.lexsort((ids_arr, -scores))  # descending score, ties by id
    ranks = np.empty(len(ids), dtype=np.int64)
    ranks[order] = np.arange(1, len(ids) + 1)
    keep = ~(scores > delta)  # strict inequality drops an instance
    return ranks, keep


def classify_clique(y_i: int, y_j: int, y_j_pred: int) -> str:
    """Agreement pattern of (instance label, prototype label, prototype prediction)."""
    if y_i == y_j:
        return "c11"
    if y_j_pred == y_j:
        return "c10"
    if y_j_pred == y_i:
        return "c00"
    return "c01"


def clique_weight(clique: str, p: RankParams) -> float:
    """Signed weight of a pattern: reward for agreement, graded blame otherwise."""
    if clique == "c11":
        return -1.0
    if clique == "c10":
        return 1.0 - p.alpha
    if clique == "c01":
        return p.alpha
    if clique == "c00":
        return p.alpha * p.blame_factor
    raise ValidationError(f"unknown clique type {clique!r}")


def _clique_codes(y_i: np.ndarray, y_j: int, y_pred: int) -> np.ndarray:
    """Vectorized classify_clique over instance labels; same case order."""
    return np.where(
        y_i == y_j, _CLIQUE_CODE["c11"],
        np.where(
            y_pred == y_j, _CLIQUE_CODE["c10"],
            np.where(y_pred == y_i, _CLIQUE_CODE["c00"], _CLIQUE_CODE["c01"]),
        ),
    ).astype(np.uint8)


def predict_label(
    ds: EmbeddingDataset, proto_index: int, neigh: NeighborList, p: RankParams
) -> PrototypePrediction:
    """Weighted-kNN vote: argmax over classes of summed kernel weights, ties to the smaller class."""
    if len(neigh) == 0:
        raise ValidationError(f"no neighbors available for prototype {proto_index}")
    if neigh.query_index != proto_index:
        raise ValidationError(
            f"neighbor list belongs to row {neigh.query_index}, not {proto_index}"
        )
    if len(neigh) != min(p.k, ds.n_instances - 1):
        raise ValidationError(f"neighbor list length {len(neigh)} does not match k={p.k}")
    votes = np.zeros(ds.n_classes, dtype=np.float64)
    np.add.at(votes, ds.labels[neigh.indices], kernel(neigh.distances, p.kernel))
    return PrototypePrediction(
        prototype_index=int(proto_index),
        predicted_label=int(votes.argmax()),
        vote_mass=votes,
        neighbors=neigh,
    )


def _predict_batch(ds, proto_rows, p, n_jobs):
    lists = knn(ds, proto_rows, p.k, n_jobs=n_jobs)
    if n_jobs <= 1 or len(proto_rows) < 2:
        return [predict_label(ds, j, nb, p) for j, nb in zip(proto_rows, lists)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda args: predict_label(ds, *args, p), zip(proto_rows, lists)))


def score_all(
    ds: EmbeddingDataset,
    protos: PrototypeSet,
    p: RankParams,
    clique_scope: str = "votes",
    n_jobs: int = 1,
) -> ScoreTable:
    """Accumulate blame/reward evidence for every instance and rank the dataset.

    With the default "votes" scope an instance is scored by prototype j exactly
    when it voted in j's prediction (it is one of j's k nearest neighbors).
    The "nearest_prototypes" scope instead scores each instance against its own
    k nearest prototypes. Instances covered by no pair keep score 0.
    """
    if len(protos) == 0:
        raise ValidationError("prototype set is empty")
    if clique_scope not in CLIQUE_SCOPES:
        raise ValidationError(f"unknown clique scope {clique_scope!r}, expected one of {CLIQUE_SCOPES}")

    n = ds.n_instances
    ids_arr = np.asarray(ds.ids, dtype=str)
    id_rank = np.empty(n, dtype=np.int64)
    id_rank[np.argsort(ids_arr)] = np.arange(n)
    proto_rows = protos.indices[np.argsort(id_rank[protos.indices])]

    predictions = _predict_batch(ds, proto_rows, p, n_jobs)
    lam = np.array([clique_weight(t, p) for t in CLIQUE_TYPES], dtype=np.float64)

    inst_parts: list[np.ndarray] = []
    proto_parts: list[np.ndarray] = []
    code_parts: list[np.ndarray] = []
    contrib_parts: list[np.ndarray] = []

    if clique_scope == "votes":
        for pred in predictions:
            nb = pred.neighbors
            codes = _clique_codes(
                ds.labels[nb.indices], int(ds.labels[pred.prototype_index]), pred.predicted_label
            )
            inst_parts.append(nb.indices)
            proto_parts.append(np.full(len(nb), pred.prototype_index, dtype=np.int64))
            code_parts.append(codes)
            contrib_parts.append(lam[codes] * kernel(nb.distances, p.kernel))
    else:
        dist = distances_to_rows(ds, proto_rows)  # (N, P)
        col_label = ds.labels[proto_rows]
        col_pred = np.array([pr.predicted_label for pr in predictions], dtype=np.int64)
        col_of_row = {int(r): c for c, r in enumerate(proto_rows)}
        for i in range(n):
            d = dist[i].copy()
            own = col_of_row.get(i)
            if own is not None:
                d[own] = np.inf
            kk = min(p.k, len(proto_rows) - (own is not None))
            if kk <= 0:
                continue
            cols = np.lexsort((proto_rows, d))[:kk]
            y_i = int(ds.labels[i])
            codes = np.array(
                [_CLIQUE_CODE[classify_clique(y_i, int(col_label[c]), int(col_pred[c]))] for c in cols],
                dtype=np.uint8,
            )
            inst_parts.append(np.full(kk, i, dtype=np.int64))
            proto_parts.append(proto_rows[cols])
            code_parts.append(codes)
            contrib_parts.append(lam[codes] * kernel(d[cols], p.kernel))

    if inst_parts:
        inst = np.concatenate(inst_parts)
        proto = np.concatenate(proto_parts)
        codes = np.concatenate(code_parts)
        contrib = np.concatenate(contrib_parts)
    else:
        inst = np.empty(0, dtype=np.int64)
        proto = np.empty(0, dtype=np.int64)
        codes = np.empty(0, dtype=np.uint8)
        contrib = np.empty(0, dtype=np.float64)

    # canonical ledger order: final sums must not depend on worker scheduling
    order = np.lexsort((id_rank[proto], id_rank[inst]))
    inst, proto, codes, contrib = inst[order], proto[order], codes[order], contrib[order]

    scores = np.zeros(n, dtype=np.float64)
    np.add.at(scores, inst, contrib)
    ranks, keep = _rank_and_keep(ds.ids, scores, p.delta)
    table = ScoreTable(
        ids=list(ds.ids),
        labels=ds.labels.copy(),
        class_names=list(ds.class_names),
        scores=scores,
        ranks=ranks,
        keep=keep,
        delta=p.delta,
        ledger_instance=inst,
        ledger_prototype=proto,
        ledger_clique=codes,
        ledger_contribution=contrib,
    )
    table.validate()
    return table


def denoise(ds: EmbeddingDataset, table: ScoreTable) -> tuple[EmbeddingDataset, list[str]]:
    """Subset of instances with keep=True (dataset order) plus the removed ids."""
    keep_by_id = dict(zip(table.ids, table.keep))
    kept_rows: list[int] = []
    removed: list[str] = []
    for r, instance_id in enumerate(ds.ids):
        if instance_id not in keep_by_id:
            raise ValidationError(f"score table does not cover id {instance_id!r}")
        if keep_by_id[instance_id]:
            kept_rows.append(r)
        else:
            removed.append(instance_id)
    if not kept_rows:
        raise EmptyResultError("every instance was flagged; refusing to emit an empty dataset")
    return ds.subset(kept_rows), removed


def explain(table: ScoreTable, instance_id: str, top_n: int) -> Explanation:
    """Score, rank, keep flag, and the top_n largest-magnitude evidence entries for one id."""
    if top_n < 1:
        raise ValidationError(f"top_n must be >= 1, got {top_n}")
    idx = table.index_of(instance_id)
    rows = np.flatnonzero(table.ledger_instance == idx)
    entries = [
        EvidenceEntry(
            prototype_id=table.ids[int(table.ledger_prototype[r])],
            clique=CLIQUE_TYPES[int(table.ledger_clique[r])],
            contribution=float(table.ledger_contribution[r]),
        )
        for r in rows
    ]
    entries.sort(key=lambda e: (-abs(e.contribution), e.prototype_id))
    return Explanation(
        instance_id=instance_id,
        score=float(table.scores[idx]),
        rank=int(table.ranks[idx]),
        keep=bool(table.keep[idx]),
        entries=entries[:top_n],
    )


# ---------------------------------------------------------------------------
# file formats


def write_score_file(table: ScoreTable, path) -> None:
    order = np.argsort(table.ranks)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(SCORE_HEADER + "\n")
        for r in order:
            f.write(
                f"{int(table.ranks[r])}\t{table.ids[int(r)]}\t"
                f"{table.class_names[int(table.labels[r])]}\t"
                f"{float(table.scores[r])!r}\t{int(table.keep[r])}\n"
            )


def read_score_file(path) -> ScoreTable:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"score file not found: {path}")
    ids: list[str] = []
    tokens: list[str] = []
    ranks: list[int] = []
    scores: list[float] = []
    keep: list[bool] = []
    with open(path, encoding="utf-8", newline="") as f:
        header = f.readline().rstrip("\r\n")
        if header != SCORE_HEADER:
            raise InputError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise InputError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
            try:
                ranks.append(int(parts[0]))
                scores.append(float(parts[3]))
                flag = int(parts[4])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if flag not in (0, 1):
                raise InputError(f"{path}:{lineno}: keep flag must be 0 or 1")
            ids.append(parts[1])
            tokens.append(parts[2])
            keep.append(bool(flag))
    if not ids:
        raise InputError(f"{path}: no data rows")
    if sorted(ranks) != list(range(1, len(ids) + 1)):
        raise InputError(f"{path}: ranks are not a permutation of 1..N")
    labels, class_names = _densify_labels(tokens)
    return ScoreTable(
        ids=ids,
        labels=labels,
        class_names=class_names,
        scores=np.asarray(scores, dtype=np.float64),
        ranks=np.asarray(ranks, dtype=np.int64),
        keep=np.asarray(keep, dtype=bool),
        delta=float("nan"),
    )


def write_ledger_file(table: ScoreTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(LEDGER_HEADER + "\n")
        for i, j, c, v in zip(
            table.ledger_instance, table.ledger_prototype, table.ledger_clique, table.ledger_contribution
        ):
            f.write(f"{table.ids[int(i)]}\t{table.ids[int(j)]}\t{CLIQUE_TYPES[int(c)]}\t{float(v)!r}\n")


def read_ledger_file(path) -> tuple[list[str], list[str], list[str], list[float]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"ledger file not found: {path}")
    inst: list[str] = []
    proto: list[str] = []
    cliques: list[str] = []
    contribs: list[float] = []
    with open(path, encoding="utf-8", newline="") as f:
        header = f.readline().rstrip("\r\n")
        if header != LEDGER_HEADER:
            raise InputError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise InputError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            if parts[2] not in _CLIQUE_CODE:
                raise InputError(f"{path}:{lineno}: unknown clique type {parts[2]!r}")
            inst.append(parts[0])
            proto.append(parts[1])
            cliques.append(parts[2])
            contribs.append(float(parts[3]))
    return inst, proto, cliques, contribs


def attach_ledger(
    table: ScoreTable, inst_ids, proto_ids, cliques, contribs
) -> ScoreTable:
    """Attach ledger rows (by id) onto a table loaded from a score file."""
    index = {i: r for r, i in enumerate(table.ids)}
    try:
        inst = np.array([index[i] for i in inst_ids], dtype=np.int64)
        proto = np.array([index[j] for j in proto_ids], dtype=np.int64)
    except KeyError as exc:
        raise InputError(f"ledger references unknown id {exc.args[0]!r}") from None
    codes = np.array([_CLIQUE_CODE[c] for c in cliques], dtype=np.uint8)
    contrib = np.asarray(contribs, dtype=np.float64)
    ids_arr = np.asarray(table.ids, dtype=str)
    id_rank = np.empty(len(table.ids), dtype=np.int64)
    id_rank[np.argsort(ids_arr)] = np.arange(len(table.ids))
    order = np.lexsort((id_rank[proto], id_rank[inst]))
    return ScoreTable(
        ids=table.ids,
        labels=table.labels,
        class_names=table.class_names,
        scores=table.scores,
        ranks=table.ranks,
        keep=table.keep,
        delta=table.delta,
        ledger_instance=inst[order],
        ledger_prototype=proto[order],
        ledger_clique=codes[order],
        ledger_contribution=contrib[order],
    )
