"""Command-line entry point for the image embedding adapter."""

from __future__ import annotations

import argparse
import sys

from .extract import BACKBONES, ExtractionConfig, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-adapter",
        description="Embed a class-per-folder image tree into labelsift's binary + TSV formats.",
    )
    parser.add_argument("--input-root", required=True, help="directory with one subfolder per class")
    parser.add_argument("--embeddings-out", required=True)
    parser.add_argument("--labels-out", required=True)
    parser.add_argument("--backbone", default="resnet18", choices=sorted(BACKBONES))
    parser.add_argument("--dim", type=int, default=None,
                        help="project features to this width (default: backbone native)")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                        help="L2-normalize rows before writing (default on)")
    parser.add_argument("--weights", choices=("pretrained", "none"), default="pretrained",
                        help="'none' uses a seeded untrained backbone (offline friendly)")
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExtractionConfig(
            input_root=args.input_root,
            embeddings_out=args.embeddings_out,
            labels_out=args.labels_out,
            backbone=args.backbone,
            dim=args.dim,
            batch_size=args.batch_size,
            normalize=args.normalize,
            weights=args.weights,
            seed=args.seed,
        )
        result = extract(cfg)
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        f"embedded {result.n_written} images (dim {result.dim}, "
        f"{result.n_skipped} skipped) -> {args.embeddings_out}, {args.labels_out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
