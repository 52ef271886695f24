"""Command-line surface: rank, denoise, eval, sweep, explain, synth.

stdout carries a short human summary; all data goes to files inside the
command's --out-dir, together with a manifest.json listing every artifact and
the resolved parameters. Config precedence is CLI flag > config file >
built-in default. Exit codes: 0 ok, 2 usage, 3 input error, 4 validation
error, 5 not found, 6 empty result.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    load_dataset,
    read_label_map,
    save_dataset,
    write_id_list,
    write_label_file,
    write_label_map,
)
from .errors import InputError, EmptyResultError, LabelSiftError
from .evaluation import (
    NoiseSpec,
    blame_matrix,
    detection_metrics,
    inject_noise,
    make_blobs,
    read_mask_file,
    read_transition_file,
    write_blame_matrix,
    write_mask_file,
)
from .neighbors import KernelParams
from .pipeline import rank_dataset, sweep_detection, sweep_objective_rows
from .prototypes import POLICIES, write_prototypes_file
from .ranking import (
    CLIQUE_SCOPES,
    RankParams,
    attach_ledger,
    explain,
    read_ledger_file,
    read_score_file,
    write_ledger_file,
    write_score_file,
)

SWEEP_HEADER = "stage\tk\talpha\tblame_factor\tobjective"
OBJECTIVE_HEADER = "k\talpha\tblame_factor\tobjective"

_DEFAULTS = {
    "k": 50,
    "alpha": 0.5,
    "blame_factor": 1.0,
    "kernel_b": 1.0,
    "kernel_e": 1.0,
    "delta": 0.0,
    "seed": 0,
    "normalize": True,
    "prototype_policy": "kmeans",
}

_BOOL_TOKENS = {"true": True, "1": True, "on": True, "false": False, "0": False, "off": False}


def _parse_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    out: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _DEFAULTS:
            raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            if key in ("k", "seed"):
                out[key] = int(value)
            elif key == "normalize":
                out[key] = _BOOL_TOKENS[value.lower()]
            elif key == "prototype_policy":
                out[key] = value
            else:
                out[key] = float(value)
        except (ValueError, KeyError):
            raise InputError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


def _resolve_params(args) -> tuple[dict, dict]:
    """Apply CLI > config > default precedence; returns (values, sources)."""
    config = _parse_config_file(args.config) if getattr(args, "config", None) else {}
    values: dict = {}
    sources: dict = {}
    for key, default in _DEFAULTS.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            values[key], sources[key] = cli_value, "cli"
        elif key in config:
            values[key], sources[key] = config[key], "config"
        else:
            values[key], sources[key] = default, "default"
    if values["prototype_policy"] not in POLICIES:
        raise InputError(f"unknown prototype policy {values['prototype_policy']!r}")
    return values, sources


def _rank_params(values: dict) -> RankParams:
    return RankParams(
        k=values["k"],
        alpha=values["alpha"],
        blame_factor=values["blame_factor"],
        kernel=KernelParams(bias=values["kernel_b"], exponent=values["kernel_e"]),
        delta=values["delta"],
    )


def _write_manifest(out_dir: Path, command: str, args, inputs: dict, params: dict,
                    outputs: dict, sources: dict | None = None) -> Path:
    manifest = {
        "tool": "labelsift",
        "version": __version__,
        "command": command,
        "round": getattr(args, "round", 0),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "params": params,
        "outputs": {k: str(v) for k, v in outputs.items()},
    }
    if sources:
        manifest["param_sources"] = sources
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_rank(args) -> int:
    values, sources = _resolve_params(args)
    params = _rank_params(values)
    out = _out_dir(args)
    ds = load_dataset(args.embeddings, args.labels)
    table, protos = rank_dataset(
        ds,
        params,
        seed=values["seed"],
        normalize=values["normalize"],
        prototype_policy=values["prototype_policy"],
        count_override=args.proto_count,
        clique_scope=args.clique_scope,
        n_jobs=args.jobs,
    )
    scores_path = out / "scores.tsv"
    ledger_path = out / "ledger.tsv"
    protos_path = out / "prototypes.tsv"
    map_path = out / "label_map.tsv"
    write_score_file(table, scores_path)
    write_ledger_file(table, ledger_path)
    write_prototypes_file(protos_path, protos, ds)
    write_label_map(map_path, ds.class_names)

    reread = read_score_file(scores_path)
    if reread.n_instances != ds.n_instances:
        raise LabelSiftError("internal error: score file row count mismatch after write")

    _write_manifest(
        out, "rank", args,
        inputs={"embeddings": args.embeddings, "labels": args.labels, "config": args.config},
        params={**values, "proto_count": args.proto_count,
                "clique_scope": args.clique_scope, "jobs": args.jobs},
        outputs={"scores": scores_path, "ledger": ledger_path,
                 "prototypes": protos_path, "label_map": map_path},
        sources=sources,
    )
    flagged = int((~table.keep).sum())
    print(f"ranked {ds.n_instances} instances ({ds.n_classes} classes, "
          f"{len(protos)} prototypes); flagged {flagged} as noisy")
    order = np.argsort(table.ranks)
    for r in order[:5]:
        print(f"  rank {int(table.ranks[r])}: {table.ids[int(r)]} "
              f"(label {table.class_names[int(table.labels[r])]}, "
              f"score {float(table.scores[r]):.6g}, keep={int(table.keep[r])})")
    return 0


def cmd_denoise(args) -> int:
    out = _out_dir(args)
    table = read_score_file(args.scores)
    order = np.argsort(table.ranks)  # rank order, most suspect first
    if args.top_percent is not None:
        if args.top_percent < 0 or args.top_percent > 100:
            raise InputError(f"--top-percent must be in [0, 100], got {args.top_percent}")
        n_remove = int(round(table.n_instances * args.top_percent / 100.0))
        removed_rows = order[:n_remove]
        kept_rows = order[n_remove:]
    else:
        removed_rows = [r for r in order if not table.keep[r]]
        kept_rows = [r for r in order if table.keep[r]]
    if len(kept_rows) == 0:
        raise EmptyResultError("nothing left to keep; refusing to emit an empty id list")

    keep_path = out / "keep.txt"
    removed_path = out / "removed.txt"
    write_id_list(keep_path, (table.ids[int(r)] for r in kept_rows))
    write_id_list(removed_path, (table.ids[int(r)] for r in removed_rows))
    _write_manifest(
        out, "denoise", args,
        inputs={"scores": args.scores},
        params={"top_percent": args.top_percent},
        outputs={"keep": keep_path, "removed": removed_path},
    )
    print(f"kept {len(kept_rows)} of {table.n_instances} instances "
          f"(removed {len(removed_rows)})")
    return 0


def _aligned_mask(table, mask_path) -> np.ndarray:
    by_id = read_mask_file(mask_path)
    missing = [i for i in table.ids if i not in by_id]
    if missing:
        raise InputError(f"mask is missing id {missing[0]!r} ({len(missing)} total)")
    return np.array([by_id[i] for i in table.ids], dtype=bool)


def cmd_eval(args) -> int:
    out = _out_dir(args)
    table = read_score_file(args.scores)
    mask = _aligned_mask(table, args.mask)
    report = detection_metrics(table, mask)

    text_path = out / "report.txt"
    kv_path = out / "report.kv"
    text_path.write_text(report.to_text(table.class_names), encoding="utf-8")
    kv_path.write_text(report.to_kv(), encoding="utf-8")
    outputs = {"report_text": text_path, "report_kv": kv_path}

    if args.ledger:
        if not args.label_map:
            raise InputError("--label-map is required with --ledger")
        names = read_label_map(args.label_map)
        index = {n: i for i, n in enumerate(names)}
        try:
            labels = np.array(
                [index[table.class_names[int(v)]] for v in table.labels], dtype=np.int64
            )
        except KeyError as exc:
            raise InputError(f"score file uses label {exc.args[0]!r} not in label map") from None
        with_ledger = attach_ledger(table, *read_ledger_file(args.ledger))
        matrix = blame_matrix(with_ledger, labels=labels, n_classes=len(names))
        blame_path = out / "blame_matrix.tsv"
        write_blame_matrix(blame_path, matrix, names)
        outputs["blame_matrix"] = blame_path

    _write_manifest(
        out, "eval", args,
        inputs={"scores": args.scores, "mask": args.mask,
                "ledger": args.ledger, "label_map": args.label_map},
        params={},
        outputs=outputs,
    )
    sys.stdout.write(report.to_text(table.class_names))
    return 0


def _read_objective_file(path) -> list[tuple[int, float, float, float]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"objective file not found: {path}")
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        header = f.readline().rstrip("\r\n")
        if header != OBJECTIVE_HEADER:
            raise InputError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise InputError(f"{path}:{lineno}: expected 4 columns")
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: no configurations")
    return rows


def cmd_sweep(args) -> int:
    values, sources = _resolve_params(args)
    base = _rank_params(values)
    out = _out_dir(args)

    if args.mask:
        ds = load_dataset(args.embeddings, args.labels)
        by_id = read_mask_file(args.mask)
        missing = [i for i in ds.ids if i not in by_id]
        if missing:
            raise InputError(f"mask is missing id {missing[0]!r} ({len(missing)} total)")
        mask = np.array([by_id[i] for i in ds.ids], dtype=bool)
        result = sweep_detection(
            ds, mask, base=base,
            seed=values["seed"], normalize=values["normalize"],
            prototype_policy=values["prototype_policy"],
            count_override=args.proto_count, clique_scope=args.clique_scope,
            n_jobs=args.jobs,
        )
        objective_name = "detection_f1 (maximized)"
    elif args.objective_file:
        result = sweep_objective_rows(_read_objective_file(args.objective_file), base=base)
        objective_name = "objective file value (minimized)"
    else:
        raise InputError("no objective source: provide --mask or --objective-file")

    sweep_path = out / "sweep.tsv"
    with open(sweep_path, "w", encoding="utf-8", newline="") as f:
        f.write(SWEEP_HEADER + "\n")
        for row in result.rows:
            f.write(f"{row.stage}\t{row.k}\t{row.alpha!r}\t{row.blame_factor!r}\t{row.objective!r}\n")

    best = result.best
    config_path = out / "best_config.cfg"
    config_path.write_text(
        "\n".join(
            [
                f"k={best.k}",
                f"alpha={best.alpha!r}",
                f"blame_factor={best.blame_factor!r}",
                f"kernel_b={best.kernel.bias!r}",
                f"kernel_e={best.kernel.exponent!r}",
                f"delta={best.delta!r}",
                f"seed={values['seed']}",
                f"normalize={'true' if values['normalize'] else 'false'}",
                f"prototype_policy={values['prototype_policy']}",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    _write_manifest(
        out, "sweep", args,
        inputs={"embeddings": args.embeddings, "labels": args.labels,
                "mask": args.mask, "objective_file": args.objective_file,
                "config": args.config},
        params={**values, "proto_count": args.proto_count,
                "clique_scope": args.clique_scope, "jobs": args.jobs},
        outputs={"sweep": sweep_path, "best_config": config_path},
        sources=sources,
    )
    print(f"swept {len(result.rows)} configurations; objective: {objective_name}")
    print(f"best: k={best.k} alpha={best.alpha} blame_factor={best.blame_factor} "
          f"(objective {result.objective:.6g})")
    return 0


def cmd_explain(args) -> int:
    table = read_score_file(args.scores)
    with_ledger = attach_ledger(table, *read_ledger_file(args.ledger))
    record = explain(with_ledger, args.id, args.top_n)
    print(f"id {record.instance_id}: rank {record.rank} of {with_ledger.n_instances}, "
          f"score {record.score:.6g}, keep={int(record.keep)}")
    if not record.entries:
        print("no evidence recorded (instance fell in no prototype neighborhood)")
    else:
        print(f"evidence (top {len(record.entries)}):")
        for e in record.entries:
            print(f"  prototype {e.prototype_id}  {e.clique}  {e.contribution:+.6g}")
    return 0


def cmd_synth(args) -> int:
    out = _out_dir(args)
    ds = make_blobs(args.classes, args.per_class, args.dim, args.separation, args.seed)
    transition = "uniform" if args.transition == "uniform" else read_transition_file(args.transition)
    spec = NoiseSpec(rate=args.noise_rate, transition=transition, seed=args.seed)
    noisy, mask = inject_noise(ds, spec)

    emb_path = out / "embeddings.bin"
    labels_path = out / "labels.tsv"
    true_path = out / "true_labels.tsv"
    mask_path = out / "mask.tsv"
    save_dataset(noisy, emb_path, labels_path)
    write_label_file(true_path, ds.ids, (ds.class_names[v] for v in ds.labels))
    write_mask_file(mask_path, ds.ids, mask)
    _write_manifest(
        out, "synth", args,
        inputs={"transition": None if args.transition == "uniform" else args.transition},
        params={"classes": args.classes, "per_class": args.per_class, "dim": args.dim,
                "separation": args.separation, "noise_rate": args.noise_rate,
                "transition": "uniform" if args.transition == "uniform" else str(args.transition),
                "seed": args.seed},
        outputs={"embeddings": emb_path, "labels": labels_path,
                 "true_labels": true_path, "mask": mask_path},
    )
    print(f"generated {noisy.n_instances} instances, {noisy.n_classes} classes; "
          f"flipped {int(mask.sum())} labels")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file (CLI flags win)")
    p.add_argument("--k", type=int, help="neighborhood size")
    p.add_argument("--alpha", type=float, help="incorrect-vote impact, in [0.5, 1]")
    p.add_argument("--blame-factor", dest="blame_factor", type=float, help="strong-blame multiplier, >= 1")
    p.add_argument("--kernel-b", dest="kernel_b", type=float, help="kernel bias, > 0")
    p.add_argument("--kernel-e", dest="kernel_e", type=float, help="kernel exponent, > 0")
    p.add_argument("--delta", type=float, help="removal threshold, >= 0")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="L2-normalize rows before ranking (default on)")
    p.add_argument("--prototype-policy", dest="prototype_policy", choices=POLICIES,
                   help="prototype selection policy")
    p.add_argument("--proto-count", dest="proto_count", type=int, default=None,
                   help="override the per-class prototype count formula")
    p.add_argument("--clique-scope", dest="clique_scope", choices=CLIQUE_SCOPES, default="votes",
                   help="which (instance, prototype) pairs are scored")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelsift",
        description="Rank labeled embedding instances by how likely their labels are wrong.",
    )
    parser.add_argument("--version", action="version", version=f"labelsift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
        p.add_argument("--round", type=int, default=0,
                       help="iteration counter recorded in the manifest")

    p = sub.add_parser("rank", help="score and rank a dataset")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_param_flags(p)
    common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("denoise", help="emit the kept-id list from a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--top-percent", dest="top_percent", type=float, default=None,
                   help="remove the top x%% ranked instances instead of using keep flags")
    common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="score detection quality against a ground-truth mask")
    p.add_argument("--scores", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--ledger", default=None, help="evidence ledger (enables the blame matrix)")
    p.add_argument("--label-map", dest="label_map", default=None)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="two-stage hyperparameter grid search")
    p.add_argument("--embeddings")
    p.add_argument("--labels")
    p.add_argument("--mask", default=None, help="ground-truth mask (objective: detection F1)")
    p.add_argument("--objective-file", dest="objective_file", default=None,
                   help="externally computed per-config objective (minimized)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_param_flags(p)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("explain", help="show the evidence behind one instance's score")
    p.add_argument("--scores", required=True)
    p.add_argument("--ledger", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--top-n", dest="top_n", type=int, default=10)
    common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("synth", help="generate a blob dataset with injected label noise")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", dest="per_class", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--separation", type=float, required=True)
    p.add_argument("--noise-rate", dest="noise_rate", type=float, required=True)
    p.add_argument("--transition", default="uniform",
                   help='"uniform" or a TSV transition-matrix file')
    p.add_argument("--out-dir", dest="out_dir", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # rank/sweep resolve seed via config precedence; the rest default here
    if getattr(args, "seed", None) is None and args.command in ("denoise", "eval", "explain", "synth"):
        args.seed = 0
    try:
        return args.func(args)
    except LabelSiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
