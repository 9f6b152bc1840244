#!/usr/bin/env python3
"""Walkthrough: the full file-based pipeline through the command line.

Every stage reads and writes the interchange formats (NPY features, JSON
Lines labels), so the same commands run unchanged on real extractor output
or on synthetic data. Each command writes a manifest recording its seed,
parameters, and output hashes; reruns with the same inputs reproduce the
same content hashes.

Run:  python3 demos/cli_pipeline_demo.py
"""

import json
import sys
import tempfile
from pathlib import Path

from afflabel.cli import main

work = Path(tempfile.mkdtemp(prefix="afflabel-demo-"))
print(f"working directory: {work}\n")


def run(*argv):
    argv = [str(a) for a in argv]
    print("$ afflabel " + " ".join(argv))
    code = main(argv)
    if code != 0:
        sys.exit(f"command failed with exit code {code}")
    print()


# 1. synthesize a dataset with intersecting subspace groups
run(
    "synth", "subspaces", "--groups", 5, "--dim", 128, "--d", 6,
    "--points-per-group", 500, "--noise", 0.01, "--seed", 1,
    "--overlap-pairs", "0-1,2-3", "--overlap-fraction", 0.1,
    "--out-features", work / "all.features.npy",
    "--out-labels", work / "all.labels.jsonl",
    "--out-catalog", work / "catalog.json",
)

# 2. split into learning and validation sets
run(
    "split", "--features", work / "all.features.npy",
    "--labels", work / "all.labels.jsonl", "--catalog", work / "catalog.json",
    "--n-learning", 2000, "--seed", 2, "--out-dir", work / "split",
)

# 3. fit both methods on the learning files
run(
    "fit", "--method", "spm",
    "--features", work / "split/learning.features.npy",
    "--labels", work / "split/learning.labels.jsonl",
    "--catalog", work / "catalog.json",
    "--out", work / "spm-model", "--roc-csv", work / "spm-roc.csv",
)
run(
    "fit", "--method", "mcm", "--neighbors", 16,
    "--features", work / "split/learning.features.npy",
    "--labels", work / "split/learning.labels.jsonl",
    "--catalog", work / "catalog.json",
    "--out", work / "mcm-model.json",
)

# 4. label the validation set with each model
for model, preds in (
    (work / "spm-model", work / "spm-preds.jsonl"),
    (work / "mcm-model.json", work / "mcm-preds.jsonl"),
):
    run(
        "label", "--model", model,
        "--features", work / "split/validation.features.npy",
        "--labels", work / "split/validation.labels.jsonl",
        "--out", preds, "--parallel", 4,
    )

# 5. evaluate both prediction files against the ground truth
for tag, preds in (("spm", work / "spm-preds.jsonl"), ("mcm", work / "mcm-preds.jsonl")):
    run(
        "eval", "--predictions", preds,
        "--truth", work / "split/validation.labels.jsonl",
        "--catalog", work / "catalog.json",
        "--out-json", work / f"{tag}-report.json",
        "--out-table", work / f"{tag}-report.txt",
        "--method-tag", tag, "--extractor-tag", "synthetic", "--vector-size", 128,
    )

# 6. diff the two reports
run(
    "compare", "--first", work / "mcm-report.json",
    "--second", work / "spm-report.json",
    "--out-json", work / "mcm-vs-spm.json",
    "--out-table", work / "mcm-vs-spm.txt",
)

print("--- evaluation table (MCM) " + "-" * 30)
print((work / "mcm-report.txt").read_text())
print("--- comparison " + "-" * 42)
print((work / "mcm-vs-spm.txt").read_text())
print("--- split manifest (content hash is rerun-stable) " + "-" * 9)
manifest = json.loads((work / "split/manifest.json").read_text())
print(json.dumps({k: manifest[k] for k in ("command", "seed", "content_hash")}, indent=2))
