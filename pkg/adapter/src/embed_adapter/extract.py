"""Image folder -> embedding matrix + label TSV for the ranking engine.

Expects one subfolder per class label under the input root. Every image
becomes one row of a float32 matrix written in the engine's binary format
(magic NRK1, uint32 N, uint32 m little-endian, row-major float32), with a
matching `id<TAB>label` TSV. Row order is the lexicographic order of the
relative image paths, so repeated runs over the same tree produce the same
files.
"""

from __future__ import annotations

import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models, transforms

MAGIC = b"NRK1"
_HEADER = struct.Struct("<4sII")

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp"}

BACKBONES = {
    "resnet18": (models.resnet18, 512),
    "resnet34": (models.resnet34, 512),
    "resnet50": (models.resnet50, 2048),
}

_PRETRAINED_WEIGHTS = {
    "resnet18": "IMAGENET1K_V1",
    "resnet34": "IMAGENET1K_V1",
    "resnet50": "IMAGENET1K_V2",
}


@dataclass
class ExtractionConfig:
    input_root: Path
    embeddings_out: Path
    labels_out: Path
    backbone: str = "resnet18"
    dim: int | None = None  # None keeps the backbone's native feature width
    batch_size: int = 32
    normalize: bool = True
    weights: str = "pretrained"  # "pretrained" or "none" (seeded random init)
    seed: int = 0

    def __post_init__(self):
        self.input_root = Path(self.input_root)
        self.embeddings_out = Path(self.embeddings_out)
        self.labels_out = Path(self.labels_out)
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}, expected one of {sorted(BACKBONES)}")
        if self.weights not in ("pretrained", "none"):
            raise ValueError(f"weights must be 'pretrained' or 'none', got {self.weights!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.dim is not None and self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


@dataclass
class ExtractionResult:
    n_written: int
    n_skipped: int
    dim: int
    skipped: list[str] = field(default_factory=list)


def list_images(root: Path) -> list[tuple[str, str, Path]]:
    """(relative posix path, class label, absolute path) in lexicographic path order."""
    if not root.is_dir():
        raise FileNotFoundError(f"input root not found or not a directory: {root}")
    found = []
    for class_dir in root.iterdir():
        if not class_dir.is_dir():
            continue
        for path in class_dir.rglob("*"):
            if path.is_file() and path.suffix.lower() in IMAGE_EXTENSIONS:
                found.append((path.relative_to(root).as_posix(), class_dir.name, path))
    found.sort(key=lambda item: item[0])
    return found


def build_backbone(cfg: ExtractionConfig) -> tuple[torch.nn.Module, int]:
    factory, native_dim = BACKBONES[cfg.backbone]
    if cfg.weights == "pretrained":
        try:
            model = factory(weights=_PRETRAINED_WEIGHTS[cfg.backbone])
        except Exception as exc:
            raise RuntimeError(
                f"pretrained weights for {cfg.backbone} are not available locally or cached "
                f"({exc}); pass weights='none' for a seeded untrained backbone"
            ) from exc
    else:
        torch.manual_seed(cfg.seed)
        model = factory(weights=None)
    model.fc = torch.nn.Identity()  # pooled feature layer output
    model.eval()
    return model, native_dim


_PREPROCESS = transforms.Compose(
    [
        transforms.Resize(256),
        transforms.CenterCrop(224),
        transforms.ToTensor(),
        transforms.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
    ]
)


def _load_image(path: Path) -> torch.Tensor | None:
    try:
        with Image.open(path) as img:
            return _PREPROCESS(img.convert("RGB"))
    except Exception as exc:
        print(f"warning: skipping unreadable image {path}: {exc}", file=sys.stderr)
        return None


def write_embedding_file(path: Path, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, vectors.shape[0], vectors.shape[1]))
        f.write(vectors.tobytes())


def write_label_file(path: Path, rows: list[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for image_id, label in rows:
            f.write(f"{image_id}\t{label}\n")


def extract(cfg: ExtractionConfig) -> ExtractionResult:
    """Embed every readable image and write the engine's two files.

    Unreadable images are skipped with a warning and excluded from both files
    so the header N always matches the label row count.
    """
    entries = list_images(cfg.input_root)
    if not entries:
        raise FileNotFoundError(f"no images found under {cfg.input_root}")

    model, native_dim = build_backbone(cfg)

    rows: list[tuple[str, str]] = []
    features: list[np.ndarray] = []
    skipped: list[str] = []
    batch: list[torch.Tensor] = []
    batch_rows: list[tuple[str, str]] = []

    def flush():
        if not batch:
            return
        with torch.no_grad():
            out = model(torch.stack(batch)).numpy().astype(np.float64)
        features.append(out)
        rows.extend(batch_rows)
        batch.clear()
        batch_rows.clear()

    for rel, label, path in entries:
        tensor = _load_image(path)
        if tensor is None:
            skipped.append(rel)
            continue
        batch.append(tensor)
        batch_rows.append((rel, label))
        if len(batch) == cfg.batch_size:
            flush()
    flush()

    if not rows:
        raise FileNotFoundError(f"no readable images under {cfg.input_root}")

    matrix = np.concatenate(features, axis=0)
    if cfg.dim is not None and cfg.dim != native_dim:
        # fixed seeded projection realizes a user-requested width
        rng = np.random.default_rng(cfg.seed)
        projection = rng.standard_normal((native_dim, cfg.dim)) / np.sqrt(cfg.dim)
        matrix = matrix @ projection
    if cfg.normalize:
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        matrix = matrix / norms

    write_embedding_file(cfg.embeddings_out, matrix)
    write_label_file(cfg.labels_out, rows)
    return ExtractionResult(
        n_written=len(rows), n_skipped=len(skipped), dim=matrix.shape[1], skipped=skipped
    )
