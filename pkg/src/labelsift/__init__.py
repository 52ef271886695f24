"""labelsift: rank labeled embedding instances by how likely their labels are wrong."""

__version__ = "0.1.0"

from .data import EmbeddingDataset, l2_normalize, load_dataset, save_dataset
from .errors import (
    EmptyResultError,
    InputError,
    LabelSiftError,
    NotFoundError,
    ValidationError,
)
from .evaluation import (
    NoiseReport,
    NoiseSpec,
    blame_matrix,
    detection_metrics,
    inject_noise,
    make_blobs,
)
from .neighbors import KernelParams, NeighborList, distance, kernel, knn
from .pipeline import rank_dataset, sweep_detection, sweep_objective_rows
from .prototypes import PrototypeSet, prototype_count, select_prototypes
from .ranking import (
    CLIQUE_TYPES,
    PrototypePrediction,
    RankParams,
    ScoreTable,
    classify_clique,
    clique_weight,
    denoise,
    explain,
    predict_label,
    score_all,
)

__all__ = [
    "CLIQUE_TYPES",
    "EmbeddingDataset",
    "EmptyResultError",
    "InputError",
    "KernelParams",
    "LabelSiftError",
    "NeighborList",
    "NoiseReport",
    "NoiseSpec",
    "NotFoundError",
    "PrototypePrediction",
    "PrototypeSet",
    "RankParams",
    "ScoreTable",
    "ValidationError",
    "blame_matrix",
    "classify_clique",
    "clique_weight",
    "denoise",
    "detection_metrics",
    "distance",
    "explain",
    "inject_noise",
    "kernel",
    "knn",
    "l2_normalize",
    "load_dataset",
    "make_blobs",
    "predict_label",
    "prototype_count",
    "rank_dataset",
    "save_dataset",
    "score_all",
    "select_prototypes",
    "sweep_detection",
    "sweep_objective_rows",
]
