"""Scene-level label derivation from pixel-annotated label images.

Label images annotate affordances per pixel; the scene-level multi-hot set
is simply every affordance present in any pixel. The pixel-value-to-name
palette ships as an editable JSON file because the upstream encoding
varies; unknown non-background values are collected into an audit log and
ignored rather than failing the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class Palette:
    """Mapping from label-image pixel value to affordance name."""

    value_to_name: dict[int, str]
    background: int = 0

    @classmethod
    def load(cls, path) -> "Palette":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        background = int(data.get("background", 0))
        mapping = {int(k): str(v) for k, v in data["values"].items()}
        return cls(value_to_name=mapping, background=background)

    @classmethod
    def default(cls) -> "Palette":
        raw = resources.files("affex").joinpath("default_palette.json").read_text()
        data = json.loads(raw)
        return cls(
            value_to_name={int(k): str(v) for k, v in data["values"].items()},
            background=int(data.get("background", 0)),
        )


@dataclass
class LabelAudit:
    """Unknown pixel values seen while deriving labels, per scene."""

    unknown: dict[str, list[int]] = field(default_factory=dict)

    def record(self, scene_id: str, values) -> None:
        if len(values):
            self.unknown[scene_id] = sorted(int(v) for v in values)

    def write(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"unknown_pixel_values": self.unknown}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def derive_scene_labels(
    label_image: np.ndarray,
    palette: Palette,
    scene_id: str = "",
    audit: LabelAudit | None = None,
) -> set[str]:
    """Affordance names present in any pixel of the label image.

    Background pixels are skipped; values missing from the palette go to
    the audit log (when given) and are otherwise ignored.
    """
    arr = np.asarray(label_image)
    if arr.ndim == 3:  # palette-indexed images saved as RGB: use one channel
        arr = arr[..., 0]
    values = np.unique(arr)
    values = values[values != palette.background]
    known = {v for v in values.tolist() if v in palette.value_to_name}
    unknown = [v for v in values.tolist() if v not in palette.value_to_name]
    if audit is not None:
        audit.record(scene_id, unknown)
    return {palette.value_to_name[v] for v in known}


def load_label_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img)
