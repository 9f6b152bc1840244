"""The `extract` command: dataset directory in, interchange files out."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractorSpec, extract_features
from .networks import NETWORKS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description=(
            "Extract feature vectors and scene-level affordance labels from "
            "an image dataset using a headless pretrained classifier."
        ),
    )
    parser.add_argument(
        "--network",
        required=True,
        help="backbone name: " + ", ".join(sorted(NETWORKS)),
    )
    parser.add_argument("--root", required=True, help="dataset root with rgb/ and labels/")
    parser.add_argument("--out-features", required=True)
    parser.add_argument("--out-labels", required=True)
    parser.add_argument("--weights", help="optional state-dict path for pretrained weights")
    parser.add_argument("--palette", help="pixel-value-to-affordance JSON map")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--input-size", type=int, help="override the registry input size")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--audit-log", help="where to write unknown-pixel-value audit JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExtractorSpec(
        network=args.network,
        root=args.root,
        out_features=args.out_features,
        out_labels=args.out_labels,
        weights_path=args.weights,
        palette_path=args.palette,
        batch_size=args.batch_size,
        input_size=args.input_size,
        device=args.device,
        audit_path=args.audit_log,
    )
    try:
        result = extract_features(spec)
    except (FileNotFoundError, ValueError) as exc:
        print(f"extract: error: {exc}", file=sys.stderr)
        return 2
    skipped = f", {len(result.excluded)} scenes excluded (no labels)" if result.excluded else ""
    print(
        f"extract: {result.n_scenes} scenes x {result.feature_dim} features "
        f"-> {spec.out_features}{skipped}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
