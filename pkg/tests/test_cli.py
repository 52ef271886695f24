import json

import numpy as np
import pytest

from labelsift import load_dataset
from labelsift.cli import main
from labelsift.ranking import read_score_file


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "data"
    assert run(
        "synth", "--classes", 3, "--per-class", 40, "--dim", 8, "--separation", 8,
        "--noise-rate", 0.2, "--seed", 7, "--out-dir", out,
    ) == 0
    return out


@pytest.fixture
def rank_dir(synth_dir, tmp_path):
    out = tmp_path / "rank"
    assert run(
        "rank", "--embeddings", synth_dir / "embeddings.bin",
        "--labels", synth_dir / "labels.tsv", "--no-normalize",
        "--seed", 7, "--out-dir", out,
    ) == 0
    return out


class TestSynth:
    def test_outputs_validate(self, synth_dir):
        ds = load_dataset(synth_dir / "embeddings.bin", synth_dir / "labels.tsv")
        assert ds.n_instances == 120 and ds.n_classes == 3
        manifest = json.loads((synth_dir / "manifest.json").read_text())
        assert set(manifest["outputs"]) == {"embeddings", "labels", "true_labels", "mask"}
        assert manifest["command"] == "synth"


class TestRank:
    def test_artifacts(self, rank_dir):
        for name in ("scores.tsv", "ledger.tsv", "prototypes.tsv", "label_map.tsv", "manifest.json"):
            assert (rank_dir / name).is_file()
        table = read_score_file(rank_dir / "scores.tsv")
        assert table.n_instances == 120

    def test_missing_label_file_is_input_error(self, synth_dir, tmp_path):
        code = run(
            "rank", "--embeddings", synth_dir / "embeddings.bin",
            "--labels", synth_dir / "nope.tsv", "--out-dir", tmp_path / "r",
        )
        assert code == 3

    def test_config_precedence_recorded(self, synth_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("alpha=0.8\nk=10\n", encoding="utf-8")
        out = tmp_path / "r"
        assert run(
            "rank", "--embeddings", synth_dir / "embeddings.bin",
            "--labels", synth_dir / "labels.tsv", "--out-dir", out,
            "--config", cfg, "--alpha", 0.6, "--no-normalize",
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["params"]["alpha"] == 0.6
        assert manifest["param_sources"]["alpha"] == "cli"
        assert manifest["params"]["k"] == 10
        assert manifest["param_sources"]["k"] == "config"
        assert manifest["param_sources"]["delta"] == "default"

    def test_unknown_config_key(self, synth_dir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("gamma=1\n", encoding="utf-8")
        code = run(
            "rank", "--embeddings", synth_dir / "embeddings.bin",
            "--labels", synth_dir / "labels.tsv", "--out-dir", tmp_path / "r",
            "--config", cfg,
        )
        assert code == 3

    def test_bad_param_value(self, synth_dir, tmp_path):
        code = run(
            "rank", "--embeddings", synth_dir / "embeddings.bin",
            "--labels", synth_dir / "labels.tsv", "--out-dir", tmp_path / "r",
            "--alpha", 0.3,
        )
        assert code == 4


class TestDenoise:
    def test_keep_flags(self, rank_dir, tmp_path):
        out = tmp_path / "d"
        assert run("denoise", "--scores", rank_dir / "scores.tsv", "--out-dir", out) == 0
        table = read_score_file(rank_dir / "scores.tsv")
        kept = (out / "keep.txt").read_text().split()
        removed = (out / "removed.txt").read_text().split()
        assert len(kept) == int(table.keep.sum())
        assert len(kept) + len(removed) == table.n_instances
        assert set(kept) | set(removed) == set(table.ids)

    def test_top_percent_zero(self, rank_dir, tmp_path):
        out = tmp_path / "d0"
        assert run(
            "denoise", "--scores", rank_dir / "scores.tsv", "--out-dir", out,
            "--top-percent", 0,
        ) == 0
        assert (out / "removed.txt").read_text() == ""
        assert len((out / "keep.txt").read_text().split()) == 120

    def test_top_percent_counts(self, rank_dir, tmp_path):
        out = tmp_path / "d5"
        assert run(
            "denoise", "--scores", rank_dir / "scores.tsv", "--out-dir", out,
            "--top-percent", 5,
        ) == 0
        removed = (out / "removed.txt").read_text().split()
        assert len(removed) == 6  # round(120 * 5%)
        table = read_score_file(rank_dir / "scores.tsv")
        order = np.argsort(table.ranks)
        assert removed == [table.ids[int(r)] for r in order[:6]]


class TestEval:
    def test_report_and_blame(self, synth_dir, rank_dir, tmp_path):
        out = tmp_path / "e"
        assert run(
            "eval", "--scores", rank_dir / "scores.tsv", "--mask", synth_dir / "mask.tsv",
            "--ledger", rank_dir / "ledger.tsv", "--label-map", rank_dir / "label_map.tsv",
            "--out-dir", out,
        ) == 0
        kv = dict(
            line.split("=", 1) for line in (out / "report.kv").read_text().splitlines()
        )
        assert 0.0 <= float(kv["recall"]) <= 1.0
        assert (out / "blame_matrix.tsv").is_file()
        header = (out / "blame_matrix.tsv").read_text().splitlines()[0]
        assert header.split("\t")[1:] == ["0", "1", "2"]

    def test_perfect_detection_reports_full_recall(self, rank_dir, tmp_path, capsys):
        # mask that matches the flags exactly
        table = read_score_file(rank_dir / "scores.tsv")
        mask_path = tmp_path / "mask.tsv"
        lines = ["id\tflipped"] + [
            f"{i}\t{0 if keep else 1}" for i, keep in zip(table.ids, table.keep)
        ]
        mask_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "e"
        assert run("eval", "--scores", rank_dir / "scores.tsv", "--mask", mask_path,
                   "--out-dir", out) == 0
        assert "recall               : 1.0000" in capsys.readouterr().out

    def test_ledger_without_map_rejected(self, synth_dir, rank_dir, tmp_path):
        code = run(
            "eval", "--scores", rank_dir / "scores.tsv", "--mask", synth_dir / "mask.tsv",
            "--ledger", rank_dir / "ledger.tsv", "--out-dir", tmp_path / "e",
        )
        assert code == 3


class TestExplain:
    def test_prints_evidence(self, rank_dir, capsys):
        table = read_score_file(rank_dir / "scores.tsv")
        top_id = table.ids[int(np.argmin(table.ranks))]
        assert run(
            "explain", "--scores", rank_dir / "scores.tsv",
            "--ledger", rank_dir / "ledger.tsv", "--id", top_id, "--top-n", 3,
        ) == 0
        out = capsys.readouterr().out
        assert f"id {top_id}: rank 1" in out
        assert "prototype " in out
        assert any(pattern in out for pattern in ("c11", "c10", "c01", "c00"))

    def test_unknown_id(self, rank_dir):
        assert run(
            "explain", "--scores", rank_dir / "scores.tsv",
            "--ledger", rank_dir / "ledger.tsv", "--id", "missing",
        ) == 5


class TestSweep:
    def test_synthetic_mask_objective(self, synth_dir, tmp_path):
        out = tmp_path / "sw"
        assert run(
            "sweep", "--embeddings", synth_dir / "embeddings.bin",
            "--labels", synth_dir / "labels.tsv", "--mask", synth_dir / "mask.tsv",
            "--no-normalize", "--seed", 7, "--out-dir", out,
        ) == 0
        rows = (out / "sweep.tsv").read_text().splitlines()
        assert rows[0] == "stage\tk\talpha\tblame_factor\tobjective"
        assert len(rows) == 1 + 15  # 6 k values + 9 (alpha, b_f) combos
        cfg = dict(
            line.split("=", 1) for line in (out / "best_config.cfg").read_text().splitlines()
        )
        # the winner maximizes the objective among logged stage-2 rows,
        # ties to smaller k, then alpha, then blame_factor
        parsed = [line.split("\t") for line in rows[1:]]
        stage2 = [
            (float(o), int(k), float(a), float(b))
            for stage, k, a, b, o in parsed
            if stage == "2"
        ]
        best = min(stage2, key=lambda t: (-t[0], t[1], t[2], t[3]))
        assert (int(cfg["k"]), float(cfg["alpha"]), float(cfg["blame_factor"])) == best[1:]

    def test_objective_file_single_config(self, tmp_path):
        obj = tmp_path / "obj.tsv"
        obj.write_text("k\talpha\tblame_factor\tobjective\n10\t0.6\t2.0\t0.42\n", encoding="utf-8")
        out = tmp_path / "sw"
        assert run("sweep", "--objective-file", obj, "--out-dir", out) == 0
        cfg = (out / "best_config.cfg").read_text()
        assert "k=10" in cfg and "alpha=0.6" in cfg and "blame_factor=2.0" in cfg

    def test_objective_file_minimized_with_tie_break(self, tmp_path):
        obj = tmp_path / "obj.tsv"
        obj.write_text(
            "k\talpha\tblame_factor\tobjective\n"
            "50\t0.5\t1.0\t0.30\n"
            "10\t0.5\t1.0\t0.30\n"  # tie on objective: smaller k wins
            "10\t0.8\t1.0\t0.25\n"
            "10\t0.6\t1.0\t0.25\n",  # tie at stage 2: smaller alpha wins
            encoding="utf-8",
        )
        out = tmp_path / "sw"
        assert run("sweep", "--objective-file", obj, "--out-dir", out) == 0
        cfg = (out / "best_config.cfg").read_text()
        assert "k=10" in cfg and "alpha=0.6" in cfg

    def test_no_objective_source(self, tmp_path):
        assert run("sweep", "--out-dir", tmp_path / "sw") == 3


class TestPlantedPipeline:
    def test_planted_point_flagged_through_cli(self, tmp_path):
        """The two-cluster planted dataset, end to end over files."""
        import struct

        points = np.array([0.0, 0.1, 0.2, 10.0, 10.1, 10.2, 0.05], dtype="<f4").reshape(-1, 1)
        labels = ["a", "a", "a", "b", "b", "b", "b"]
        emb = tmp_path / "e.bin"
        emb.write_bytes(struct.pack("<4sII", b"NRK1", 7, 1) + points.tobytes())
        lab = tmp_path / "l.tsv"
        lab.write_text("".join(f"p{i}\t{t}\n" for i, t in enumerate(labels)), encoding="utf-8")
        out = tmp_path / "r"
        assert run(
            "rank", "--embeddings", emb, "--labels", lab, "--no-normalize",
            "--k", 3, "--seed", 0, "--out-dir", out,
        ) == 0
        table = read_score_file(out / "scores.tsv")
        flagged = [i for i, keep in zip(table.ids, table.keep) if not keep]
        assert flagged == ["p6"]
        assert table.ids[int(np.argmin(table.ranks))] == "p6"


class TestUsage:
    def test_bad_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as err:
            run("frobnicate")
        assert err.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as err:
            run("--version")
        assert err.value.code == 0
        assert "labelsift" in capsys.readouterr().out
