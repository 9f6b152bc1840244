"""Affordance label catalog: ordered label vocabulary and alias resolution.

The catalog fixes the bit positions of the multi-hot encoding: bit i of a
label set refers to ``catalog.labels[i]``. The canonical vocabulary has 15
entries; synthetic benchmarks use smaller ad-hoc catalogs with the same
machinery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UnknownLabelError, ValidationError

# Canonical 15-label vocabulary, in bit-position order.
CANONICAL_LABELS = (
    "grasp",
    "wrap-grasp",
    "contain",
    "liquid contain",
    "open",
    "dry",
    "tip-push",
    "display",
    "illuminate",
    "cut",
    "pour",
    "roll",
    "absorb",
    "grip",
    "staple",
)

# Upstream dataset spellings mapped onto the canonical names.
CANONICAL_ALIASES = {
    "openable": "open",
    "illumination": "illuminate",
    "pourable": "pour",
    "rollable": "roll",
    "stapling": "staple",
    "containment": "contain",
    "liquid-containment": "liquid contain",
}


@dataclass(frozen=True)
class AffordanceCatalog:
    """Ordered, unique label vocabulary with optional alias resolution."""

    labels: tuple[str, ...]
    aliases: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValidationError("catalog must contain at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("catalog labels must be unique")
        for alias, target in self.aliases.items():
            if target not in self.labels:
                raise ValidationError(
                    f"alias {alias!r} points at unknown label {target!r}"
                )
            if alias in self.labels:
                raise ValidationError(f"alias {alias!r} shadows a catalog label")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(
            self, "_index", {name: i for i, name in enumerate(self.labels)}
        )

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        """Bit position of a label, resolving aliases; raises UnknownLabelError."""
        resolved = self.aliases.get(name, name)
        try:
            return self._index[resolved]
        except KeyError:
            raise UnknownLabelError(f"unknown label {name!r}") from None

    def names(self, bits) -> tuple[str, ...]:
        """Label names for a collection of bit positions, in catalog order."""
        return tuple(self.labels[i] for i in sorted(set(bits)))

    @classmethod
    def canonical(cls) -> "AffordanceCatalog":
        """The fixed 15-label affordance vocabulary with dataset-name aliases."""
        return cls(labels=CANONICAL_LABELS, aliases=dict(CANONICAL_ALIASES))


def load_catalog(path) -> AffordanceCatalog:
    """Read a catalog file.

    Two layouts are accepted: a bare JSON array of label strings (no
    aliases), or an object ``{"labels": [...], "aliases": {...}}``.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, list):
        return AffordanceCatalog(labels=tuple(data))
    if isinstance(data, dict) and "labels" in data:
        return AffordanceCatalog(
            labels=tuple(data["labels"]), aliases=dict(data.get("aliases", {}))
        )
    raise ValidationError(f"catalog file {path}: expected array or object with 'labels'")


def save_catalog(catalog: AffordanceCatalog, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    payload: object = (
        list(catalog.labels)
        if not catalog.aliases
        else {"labels": list(catalog.labels), "aliases": dict(catalog.aliases)}
    )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
