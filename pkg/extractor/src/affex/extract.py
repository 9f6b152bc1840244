"""Feature extraction: images in, afflabel interchange files out.

Scenes run through the headless backbone in batches; features land as an
NPY v1.0 float32 array of shape (N, feature_dim) with one row per scene,
ids/labels as JSON Lines in the same order. Scenes whose label image
yields an empty affordance set are excluded and recorded in the run
manifest, since downstream ground-truth tables require at least one label.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .dataset import ScenePair, discover_pairs
from .labels import LabelAudit, Palette, derive_scene_labels, load_label_image
from .networks import NetworkInfo, build_feature_extractor, resolve_network
from .preprocess import load_rgb, standardize_image, to_model_batch


@dataclass
class ExtractorSpec:
    """One extraction run: network choice, dataset location, output paths."""

    network: str
    root: str
    out_features: str
    out_labels: str
    weights_path: str | None = None
    palette_path: str | None = None
    batch_size: int = 8
    input_size: int | None = None  # override the registry default
    device: str = "cpu"
    audit_path: str | None = None

    def info(self) -> NetworkInfo:
        return resolve_network(self.network)


@dataclass
class ExtractionResult:
    n_scenes: int
    feature_dim: int
    excluded: list[str] = field(default_factory=list)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def extract_features(spec: ExtractorSpec) -> ExtractionResult:
    """Run the full pipeline and write feature/label/manifest files."""
    info = spec.info()
    input_size = spec.input_size or info.input_size
    palette = Palette.load(spec.palette_path) if spec.palette_path else Palette.default()
    audit = LabelAudit()
    pairs = discover_pairs(spec.root)

    # derive labels first; scenes with no affordance pixels are excluded
    kept: list[ScenePair] = []
    label_sets: list[list[str]] = []
    excluded: list[str] = []
    for pair in pairs:
        names = derive_scene_labels(
            load_label_image(pair.label_path), palette, pair.scene_id, audit
        )
        if names:
            kept.append(pair)
            label_sets.append(sorted(names))
        else:
            excluded.append(pair.scene_id)

    model = build_feature_extractor(info, spec.weights_path)
    device = torch.device(spec.device)
    model.to(device)

    rows = []
    with torch.no_grad():
        for start in range(0, len(kept), spec.batch_size):
            chunk = kept[start : start + spec.batch_size]
            batch = to_model_batch(
                [standardize_image(load_rgb(p.rgb_path), input_size) for p in chunk]
            ).to(device)
            out = model(batch).cpu().numpy()
            if out.ndim != 2 or out.shape[1] != info.feature_dim:
                raise RuntimeError(
                    f"{info.name} produced features of shape {out.shape}, "
                    f"expected (*, {info.feature_dim})"
                )
            rows.append(out.astype("<f4"))

    features = (
        np.concatenate(rows, axis=0)
        if rows
        else np.zeros((0, info.feature_dim), dtype="<f4")
    )

    out_features = Path(spec.out_features)
    out_labels = Path(spec.out_labels)
    out_features.parent.mkdir(parents=True, exist_ok=True)
    out_labels.parent.mkdir(parents=True, exist_ok=True)
    np.save(out_features, features)
    with open(out_labels, "w", encoding="utf-8") as fh:
        for pair, names in zip(kept, label_sets):
            fh.write(json.dumps({"id": pair.scene_id, "labels": names}) + "\n")
    if spec.audit_path:
        audit.write(spec.audit_path)

    manifest = {
        "command": "extract",
        "network": info.name,
        "torchvision_builder": info.builder,
        "weights": spec.weights_path or "random initialization (seed 0)",
        "input_size": input_size,
        "feature_dim": info.feature_dim,
        "n_scenes": len(kept),
        "excluded_empty_label_scenes": excluded,
        "unknown_pixel_values": audit.unknown,
        "outputs": {
            "features": _sha256(out_features),
            "labels": _sha256(out_labels),
        },
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(str(out_features) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return ExtractionResult(
        n_scenes=len(kept), feature_dim=info.feature_dim, excluded=excluded
    )
