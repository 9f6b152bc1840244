"""Feature and label storage: interchange files, dataset split, affordance grouping.

Interchange contract:

* feature file - NPY v1.0, dtype ``<f4``, C-order, shape ``(N, D)`` with one
  scene per row; transposed to a ``D x N`` column matrix on load.
* id/label file - UTF-8 JSON Lines, one ``{"id": ..., "labels": [...]}``
  object per scene; line order defines the feature-file row order.

Values survive a save/load round trip bit-exactly at float32 precision
(saving float64 data quantizes it to float32 once; reloading is then exact).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import AffordanceCatalog
from .errors import FormatError, ValidationError

FEATURE_DTYPE = np.dtype("<f4")


@dataclass(frozen=True)
class FeatureMatrix:
    """Column-stacked feature vectors: ``data[:, k]`` belongs to ``scene_ids[k]``."""

    data: np.ndarray  # (D, N) float64
    scene_ids: tuple[str, ...]

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if data.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got {data.ndim}-D")
        if data.shape[0] < 1:
            raise ValidationError("feature dimension must be positive")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "scene_ids", tuple(self.scene_ids))
        if len(self.scene_ids) != data.shape[1]:
            raise ValidationError(
                f"id/column count mismatch: {len(self.scene_ids)} ids for "
                f"{data.shape[1]} columns"
            )
        if len(set(self.scene_ids)) != len(self.scene_ids):
            raise ValidationError("scene ids must be unique")
        if not np.all(np.isfinite(data)):
            raise ValidationError("feature matrix contains non-finite values")
        if data.shape[1]:
            norms = np.linalg.norm(data, axis=0)
            dead = np.flatnonzero(norms == 0.0)
            if dead.size:
                raise ValidationError(
                    f"all-zero feature vector for scene {self.scene_ids[dead[0]]!r}"
                )

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_scenes(self) -> int:
        return self.data.shape[1]

    def column(self, scene_id: str) -> np.ndarray:
        return self.data[:, self.scene_ids.index(scene_id)]

    def take(self, indices) -> "FeatureMatrix":
        """New matrix holding the given columns, in the given order."""
        idx = np.asarray(indices, dtype=int)
        return FeatureMatrix(
            data=self.data[:, idx],
            scene_ids=tuple(self.scene_ids[i] for i in idx),
        )


@dataclass(frozen=True)
class LabelTable:
    """Ground-truth multi-hot label sets, keyed by scene id, in file order.

    Every scene carries at least one label; predictions, which may be empty,
    are an :class:`Assignments` instead.
    """

    catalog: AffordanceCatalog
    scene_ids: tuple[str, ...]
    bits: dict[str, frozenset[int]]

    def __post_init__(self):
        object.__setattr__(self, "scene_ids", tuple(self.scene_ids))
        if len(set(self.scene_ids)) != len(self.scene_ids):
            raise ValidationError("duplicate scene id in label table")
        if set(self.scene_ids) != set(self.bits):
            raise ValidationError("label table ids and rows disagree")
        width = len(self.catalog)
        for sid, bitset in self.bits.items():
            if not bitset:
                raise ValidationError(f"empty label set for scene {sid!r}")
            if any(b < 0 or b >= width for b in bitset):
                raise ValidationError(f"label bit out of range for scene {sid!r}")

    def __len__(self) -> int:
        return len(self.scene_ids)

    def labels_for(self, scene_id: str) -> tuple[str, ...]:
        return self.catalog.names(self.bits[scene_id])

    def matrix(self, order=None) -> np.ndarray:
        """Bool (N, L) multi-hot matrix; rows follow `order` (default file order)."""
        ids = self.scene_ids if order is None else tuple(order)
        out = np.zeros((len(ids), len(self.catalog)), dtype=bool)
        for row, sid in enumerate(ids):
            out[row, list(self.bits[sid])] = True
        return out

    def take(self, scene_ids) -> "LabelTable":
        ids = tuple(scene_ids)
        return LabelTable(
            catalog=self.catalog,
            scene_ids=ids,
            bits={sid: self.bits[sid] for sid in ids},
        )


@dataclass(frozen=True)
class Assignments:
    """Predicted multi-hot label sets; empty sets are legal."""

    catalog: AffordanceCatalog
    scene_ids: tuple[str, ...]
    matrix: np.ndarray  # bool (N, L)

    def __post_init__(self):
        object.__setattr__(self, "scene_ids", tuple(self.scene_ids))
        matrix = np.asarray(self.matrix, dtype=bool)
        object.__setattr__(self, "matrix", matrix)
        if matrix.shape != (len(self.scene_ids), len(self.catalog)):
            raise ValidationError(
                f"assignment matrix shape {matrix.shape} does not match "
                f"{len(self.scene_ids)} scenes x {len(self.catalog)} labels"
            )
        if len(set(self.scene_ids)) != len(self.scene_ids):
            raise ValidationError("duplicate scene id in assignments")

    def labels_for(self, scene_id: str) -> tuple[str, ...]:
        row = self.matrix[self.scene_ids.index(scene_id)]
        return tuple(np.asarray(self.catalog.labels)[row])

    def label_sets(self) -> dict[str, tuple[str, ...]]:
        names = np.asarray(self.catalog.labels)
        return {
            sid: tuple(names[self.matrix[i]])
            for i, sid in enumerate(self.scene_ids)
        }


@dataclass(frozen=True)
class SplitSpec:
    """How to partition scenes into learning and validation sets."""

    n_learning: int
    seed: int = 0
    strategy: str = "shuffled"  # or "sequential"

    def __post_init__(self):
        if self.strategy not in ("shuffled", "sequential"):
            raise ValidationError(f"unknown split strategy {self.strategy!r}")


@dataclass(frozen=True)
class AffordanceGroups:
    """Per-affordance learning groups; a k-labeled vector appears in k groups."""

    catalog: AffordanceCatalog
    groups: dict[str, FeatureMatrix]

    def sizes(self) -> dict[str, int]:
        return {name: g.n_scenes for name, g in self.groups.items()}


# ---------------------------------------------------------------------------
# file I/O


def _read_ids_jsonl(path) -> list[str]:
    ids = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            if not isinstance(obj, dict) or "id" not in obj:
                raise FormatError(f"{path}:{lineno}: expected object with 'id'")
            ids.append(str(obj["id"]))
    return ids


def read_feature_array(path) -> np.ndarray:
    """Raw (N, D) float32 array from a feature file, after format validation."""
    try:
        arr = np.load(path, allow_pickle=False)
    except (ValueError, OSError) as exc:
        raise FormatError(f"{path}: malformed feature file ({exc})") from None
    if arr.dtype != FEATURE_DTYPE:
        raise FormatError(
            f"{path}: dtype {arr.dtype} does not match interchange dtype <f4"
        )
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected 2-D array, got {arr.ndim}-D")
    return arr


def load_feature_matrix(path, ids) -> FeatureMatrix:
    """Load a feature file plus its id sidecar.

    `ids` is either an explicit sequence of scene ids or the path of the
    JSON Lines label file whose line order matches the feature rows.
    """
    arr = read_feature_array(path)
    if isinstance(ids, (str, Path)):
        ids = _read_ids_jsonl(ids)
    ids = list(ids)
    if len(ids) != arr.shape[0]:
        raise ValidationError(
            f"id/column count mismatch: {len(ids)} ids for {arr.shape[0]} scenes"
        )
    return FeatureMatrix(data=arr.T, scene_ids=tuple(ids))


def save_feature_matrix(matrix: FeatureMatrix, path) -> None:
    """Write the interchange feature file (scenes as rows, float32)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(matrix.data.T.astype(FEATURE_DTYPE))
    np.save(path, arr)


def load_labels(path, catalog: AffordanceCatalog) -> LabelTable:
    """Parse a label file into a LabelTable, resolving aliases via the catalog."""
    ids: list[str] = []
    bits: dict[str, frozenset[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            if not isinstance(obj, dict) or "id" not in obj or "labels" not in obj:
                raise FormatError(
                    f"{path}:{lineno}: expected object with 'id' and 'labels'"
                )
            sid = str(obj["id"])
            if sid in bits:
                raise ValidationError(f"{path}:{lineno}: duplicate scene id {sid!r}")
            labels = obj["labels"]
            if not labels:
                raise ValidationError(
                    f"{path}:{lineno}: empty label set for scene {sid!r}"
                )
            bits[sid] = frozenset(catalog.index(name) for name in labels)
            ids.append(sid)
    return LabelTable(catalog=catalog, scene_ids=tuple(ids), bits=bits)


def save_labels(table: LabelTable, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for sid in table.scene_ids:
            rec = {"id": sid, "labels": list(table.labels_for(sid))}
            fh.write(json.dumps(rec) + "\n")


def load_predictions(path, catalog: AffordanceCatalog) -> Assignments:
    """Parse predictions (same layout as a label file, empty sets allowed)."""
    ids: list[str] = []
    rows: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            sid = str(obj["id"])
            if sid in ids:
                raise ValidationError(f"{path}:{lineno}: duplicate scene id {sid!r}")
            ids.append(sid)
            rows.append([catalog.index(name) for name in obj.get("labels", [])])
    matrix = np.zeros((len(ids), len(catalog)), dtype=bool)
    for i, row in enumerate(rows):
        matrix[i, row] = True
    return Assignments(catalog=catalog, scene_ids=tuple(ids), matrix=matrix)


def save_predictions(assignments: Assignments, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    names = np.asarray(assignments.catalog.labels)
    with open(path, "w", encoding="utf-8") as fh:
        for i, sid in enumerate(assignments.scene_ids):
            rec = {"id": sid, "labels": list(names[assignments.matrix[i]])}
            fh.write(json.dumps(rec) + "\n")


def load_dataset(features_path, labels_path, catalog: AffordanceCatalog):
    """Load a (features, labels) pair, cross-checking row/line counts."""
    labels = load_labels(labels_path, catalog)
    features = load_feature_matrix(features_path, labels.scene_ids)
    return features, labels


# ---------------------------------------------------------------------------
# split and grouping


def split_dataset(features: FeatureMatrix, labels: LabelTable, spec: SplitSpec):
    """Partition scenes into (learning, validation) (feature, label) pairs.

    Shuffled strategy permutes scenes with a seeded generator, so the same
    seed always yields the same partition; sequential takes the first
    ``n_learning`` columns as-is.
    """
    n = features.n_scenes
    if not 0 < spec.n_learning < n:
        raise ValidationError(
            f"n_learning must be in (0, {n}), got {spec.n_learning}"
        )
    if tuple(labels.scene_ids) != tuple(features.scene_ids):
        raise ValidationError("feature and label scene orders disagree")
    if spec.strategy == "shuffled":
        order = np.random.default_rng(spec.seed).permutation(n)
    else:
        order = np.arange(n)
    learn_idx = order[: spec.n_learning]
    valid_idx = order[spec.n_learning :]
    learn_f = features.take(learn_idx)
    valid_f = features.take(valid_idx)
    return (
        (learn_f, labels.take(learn_f.scene_ids)),
        (valid_f, labels.take(valid_f.scene_ids)),
    )


def group_by_affordance(
    features: FeatureMatrix, labels: LabelTable, catalog: AffordanceCatalog
) -> AffordanceGroups:
    """Collect, per affordance, the learning columns carrying that label.

    A vector labeled with k affordances appears in exactly k groups; group
    columns keep the learning-set column order. Empty groups are allowed
    here and rejected by the fitting stage instead.
    """
    mask = labels.matrix(order=features.scene_ids)  # (N, L)
    ids = np.asarray(features.scene_ids)
    groups = {}
    for pos, name in enumerate(catalog.labels):
        cols = np.flatnonzero(mask[:, pos])
        groups[name] = FeatureMatrix(
            data=features.data[:, cols],
            scene_ids=tuple(ids[cols]),
        )
    return AffordanceGroups(catalog=catalog, groups=groups)
