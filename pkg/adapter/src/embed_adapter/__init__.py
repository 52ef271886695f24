"""embed-adapter: image folders to labelsift embedding + label files."""

__version__ = "0.1.0"

from .extract import (
    BACKBONES,
    ExtractionConfig,
    ExtractionResult,
    extract,
    list_images,
)

__all__ = [
    "BACKBONES",
    "ExtractionConfig",
    "ExtractionResult",
    "extract",
    "list_images",
]
