"""Dataset discovery: paired RGB and label images.

Expected layout under the dataset root:

    root/
      rgb/     <scene>.png|jpg|jpeg|bmp
      labels/  <scene>.png          (pixel-annotated affordances)

Pairs match by file stem and are processed in sorted stem order. Nothing
outside rgb/ and labels/ is ever opened, so depth data (or anything else)
can sit alongside without being touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class ScenePair:
    scene_id: str
    rgb_path: Path
    label_path: Path


def discover_pairs(root) -> list[ScenePair]:
    root = Path(root)
    rgb_dir = root / "rgb"
    label_dir = root / "labels"
    if not rgb_dir.is_dir():
        raise FileNotFoundError(f"dataset root {root} has no rgb/ directory")
    if not label_dir.is_dir():
        raise FileNotFoundError(f"dataset root {root} has no labels/ directory")
    labels_by_stem = {
        p.stem: p
        for p in sorted(label_dir.iterdir())
        if p.suffix.lower() in IMAGE_SUFFIXES
    }
    pairs = []
    for rgb_path in sorted(rgb_dir.iterdir()):
        if rgb_path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        label_path = labels_by_stem.get(rgb_path.stem)
        if label_path is None:
            raise FileNotFoundError(
                f"no label image for scene {rgb_path.stem!r} in {label_dir}"
            )
        pairs.append(
            ScenePair(scene_id=rgb_path.stem, rgb_path=rgb_path, label_path=label_path)
        )
    if not pairs:
        raise FileNotFoundError(f"no image pairs found under {root}")
    return pairs
