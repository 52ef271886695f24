"""Pipeline orchestration: full ranking runs and the two-stage parameter sweep."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import EmbeddingDataset, l2_normalize
from .errors import ValidationError
from .evaluation import detection_metrics
from .neighbors import KernelParams
from .prototypes import PrototypeSet, select_prototypes
from .ranking import RankParams, ScoreTable, score_all

K_GRID = (5, 10, 20, 50, 100, 250)
ALPHA_GRID = (0.5, 0.6, 0.8)
BLAME_GRID = (1.0, 1.5, 2.0)

_STAGE1_ALPHA = 0.5
_STAGE1_BLAME = 1.0


def rank_dataset(
    ds: EmbeddingDataset,
    params: RankParams,
    seed: int = 0,
    normalize: bool = True,
    prototype_policy: str = "kmeans",
    count_override: int | None = None,
    clique_scope: str = "votes",
    n_jobs: int = 1,
    protos: PrototypeSet | None = None,
) -> tuple[ScoreTable, PrototypeSet]:
    """Normalize (optionally), select prototypes, and score the whole dataset."""
    if normalize:
        ds = l2_normalize(ds)
    if protos is None:
        protos = select_prototypes(ds, seed=seed, count_override=count_override, policy=prototype_policy)
    table = score_all(ds, protos, params, clique_scope=clique_scope, n_jobs=n_jobs)
    return table, protos


@dataclass
class SweepRow:
    stage: int
    k: int
    alpha: float
    blame_factor: float
    objective: float


@dataclass
class SweepResult:
    best: RankParams
    objective: float
    rows: list[SweepRow]


def _better(candidate: tuple, incumbent: tuple, maximize: bool) -> bool:
    """Compare (objective, k, alpha, blame_factor); ties go to smaller params."""
    c_obj, *c_rest = candidate
    i_obj, *i_rest = incumbent
    if c_obj != i_obj:
        return c_obj > i_obj if maximize else c_obj < i_obj
    return c_rest < i_rest


def sweep_detection(
    ds: EmbeddingDataset,
    mask,
    base: RankParams | None = None,
    seed: int = 0,
    normalize: bool = True,
    prototype_policy: str = "kmeans",
    count_override: int | None = None,
    clique_scope: str = "votes",
    n_jobs: int = 1,
) -> SweepResult:
    """Two-stage grid search maximizing detection F1 against a ground-truth mask.

    Stage 1 sweeps k with alpha/blame_factor pinned; stage 2 sweeps the
    (alpha, blame_factor) grid at the winning k. Prototypes depend only on the
    dataset and seed, so they are selected once and reused.
    """
    base = base or RankParams()
    mask = np.asarray(mask, dtype=bool)
    if normalize:
        ds = l2_normalize(ds)
    protos = select_prototypes(ds, seed=seed, count_override=count_override, policy=prototype_policy)

    def objective(params: RankParams) -> float:
        table = score_all(ds, protos, params, clique_scope=clique_scope, n_jobs=n_jobs)
        return detection_metrics(table, mask).f1

    rows: list[SweepRow] = []
    best_k = None
    best_key = None
    for k in K_GRID:
        params = replace(base, k=k, alpha=_STAGE1_ALPHA, blame_factor=_STAGE1_BLAME)
        obj = objective(params)
        rows.append(SweepRow(1, k, _STAGE1_ALPHA, _STAGE1_BLAME, obj))
        key = (obj, k, _STAGE1_ALPHA, _STAGE1_BLAME)
        if best_key is None or _better(key, best_key, maximize=True):
            best_key, best_k = key, k

    best_params = None
    best_key = None
    for alpha in ALPHA_GRID:
        for bf in BLAME_GRID:
            params = replace(base, k=best_k, alpha=alpha, blame_factor=bf)
            obj = objective(params)
            rows.append(SweepRow(2, best_k, alpha, bf, obj))
            key = (obj, best_k, alpha, bf)
            if best_key is None or _better(key, best_key, maximize=True):
                best_key, best_params = key, params

    return SweepResult(best=best_params, objective=best_key[0], rows=rows)


def sweep_objective_rows(
    rows: list[tuple[int, float, float, float]], base: RankParams | None = None
) -> SweepResult:
    """Pick the best config from externally supplied (k, alpha, blame_factor, objective) rows.

    The objective stands in for a training-loss criterion, so smaller is
    better. The two-stage structure is honored when stage-1 rows
    (alpha=0.5, blame_factor=1.0) exist; otherwise the best overall row wins.
    Ties break to smaller k, then alpha, then blame_factor.
    """
    base = base or RankParams()
    if not rows:
        raise ValidationError("objective file has no configurations")

    stage1 = [(k, a, b, o) for (k, a, b, o) in rows if a == _STAGE1_ALPHA and b == _STAGE1_BLAME]
    candidates = rows
    if stage1:
        best_key = None
        best_k = None
        for k, a, b, o in stage1:
            key = (o, k, a, b)
            if best_key is None or _better(key, best_key, maximize=False):
                best_key, best_k = key, k
        stage2 = [(k, a, b, o) for (k, a, b, o) in rows if k == best_k]
        if stage2:
            candidates = stage2

    best_key = None
    best = None
    for k, a, b, o in candidates:
        key = (o, k, a, b)
        if best_key is None or _better(key, best_key, maximize=False):
            best_key = key
            best = replace(base, k=k, alpha=a, blame_factor=b)

    logged = [SweepRow(0, k, a, b, o) for (k, a, b, o) in rows]
    return SweepResult(best=best, objective=best_key[0], rows=logged)
