"""Drive the whole pipeline through the CLI and the on-disk formats.

synth -> rank -> eval -> denoise, all through subprocesses and files, the way
an external training loop would consume the tool. Embeddings travel in the
binary format (magic NRK1, uint32 N, uint32 m, float32 rows); everything else
is TSV.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

root = Path(tempfile.mkdtemp(prefix="labelsift_demo_"))
print(f"working under {root}\n")


def cli(*args):
    cmd = [sys.executable, "-m", "labelsift.cli", *map(str, args)]
    print("$ labelsift " + " ".join(map(str, args)))
    res = subprocess.run(cmd, capture_output=True, text=True)
    sys.stdout.write(res.stdout)
    if res.returncode != 0:
        sys.stderr.write(res.stderr)
        raise SystemExit(res.returncode)
    print()


data, rank, ev, den = root / "data", root / "rank", root / "eval", root / "denoised"

cli("synth", "--classes", 3, "--per-class", 200, "--dim", 16, "--separation", 8,
    "--noise-rate", 0.2, "--seed", 0, "--out-dir", data)

cli("rank", "--embeddings", data / "embeddings.bin", "--labels", data / "labels.tsv",
    "--no-normalize", "--seed", 0, "--out-dir", rank)

cli("eval", "--scores", rank / "scores.tsv", "--mask", data / "mask.tsv",
    "--ledger", rank / "ledger.tsv", "--label-map", rank / "label_map.tsv",
    "--out-dir", ev)

cli("denoise", "--scores", rank / "scores.tsv", "--out-dir", den)

print("artifacts:")
for d in (data, rank, ev, den):
    for p in sorted(d.iterdir()):
        print(f"  {p.relative_to(root)}  ({p.stat().st_size} bytes)")

print("\nfirst lines of the score table:")
for line in (rank / "scores.tsv").read_text().splitlines()[:5]:
    print(" ", line)
