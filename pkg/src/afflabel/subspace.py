"""Subspace projection method (SPM).

Per affordance, the learning vectors carrying that label are stacked as
matrix columns and decomposed with an SVD; the leading left singular
vectors form an orthonormal basis of the affordance subspace. A vector is
scored against a subspace by the fraction of its norm that survives
projection,

    ratio = |U^T j| / |j|,

which equals |U U^T j| / |j| because the basis is orthonormal; the
projector U U^T itself is never materialized outside the test oracles.
Labels are assigned where the ratio strictly exceeds the affordance's
ROC-fitted threshold.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import AffordanceCatalog
from .errors import DimensionMismatchError, NumericalError, ValidationError
from .roc import ThresholdEntry, ThresholdTable, sweep_thresholds, threshold_grid
from .store import Assignments, FeatureMatrix, LabelTable, group_by_affordance
from .util import read_json, thread_map, write_json

# Relative singular-value cutoff below which directions do not count as rank.
RANK_TOL = 1e-10

DEFAULT_GRID_STEP = 1e-3


@dataclass(frozen=True)
class DimPolicy:
    """How many singular vectors to keep per affordance subspace.

    mode "fixed" keeps exactly `value` directions (clamped to the available
    rank, with a warning); mode "energy" keeps the smallest dimension whose
    squared singular values capture at least the `value` fraction of the
    total. `cap` bounds both modes.
    """

    mode: str = "energy"
    value: float = 0.95
    cap: int = 64

    def __post_init__(self):
        if self.mode == "fixed":
            if int(self.value) < 1 or self.value != int(self.value):
                raise ValidationError(f"fixed dimension must be a positive integer, got {self.value}")
        elif self.mode == "energy":
            if not 0.0 < self.value <= 1.0:
                raise ValidationError(f"energy fraction must lie in (0, 1], got {self.value}")
        else:
            raise ValidationError(f"unknown dimension policy mode {self.mode!r}")
        if self.cap < 1:
            raise ValidationError(f"dimension cap must be >= 1, got {self.cap}")

    @classmethod
    def parse(cls, text: str, cap: int = 64) -> "DimPolicy":
        """Parse "energy:0.95" or "fixed:8"."""
        m = re.fullmatch(r"(energy|fixed):([0-9.eE+-]+)", text.strip())
        if not m:
            raise ValidationError(f"cannot parse dimension policy {text!r}")
        return cls(mode=m.group(1), value=float(m.group(2)), cap=cap)

    def describe(self) -> str:
        return f"{self.mode}:{self.value:g}"


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of one affordance subspace.

    `vectors` is D x d with the leading left singular vectors as columns;
    `singular_values` keeps the full spectrum of the group matrix for
    diagnostics.
    """

    affordance: str
    vectors: np.ndarray
    singular_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.vectors.shape[0]


def fit_subspace(
    group, policy: DimPolicy, affordance: str = ""
) -> SubspaceBasis:
    """Fit one affordance subspace from the group's stacked feature vectors.

    Parameters
    ----------
    group : FeatureMatrix or (D, m) array
        Learning vectors carrying the affordance, one per column.
    policy : DimPolicy
        Dimension selection rule.
    affordance : str
        Label recorded on the returned basis.
    """
    data = group.data if isinstance(group, FeatureMatrix) else np.asarray(group, dtype=float)
    if data.ndim != 2 or data.shape[1] == 0:
        raise ValidationError(f"empty learning group for affordance {affordance!r}")
    u, s, _ = np.linalg.svd(data, full_matrices=False)
    rank = int(np.count_nonzero(s > RANK_TOL * s[0])) if s[0] > 0 else 0
    if rank == 0:
        raise NumericalError(f"group for {affordance!r} has numerical rank 0")
    if policy.mode == "fixed":
        d = int(policy.value)
        if d > rank:
            warnings.warn(
                f"requested dimension {d} exceeds available rank {rank} "
                f"for {affordance!r}; clamping",
                stacklevel=2,
            )
            d = rank
    else:
        energy = s**2
        captured = np.cumsum(energy) / energy.sum()
        d = int(np.searchsorted(captured, policy.value - 1e-15) + 1)
        d = min(d, rank)
    d = min(d, policy.cap)
    return SubspaceBasis(
        affordance=affordance, vectors=u[:, :d].copy(), singular_values=s.copy()
    )


def projection_ratio(basis: SubspaceBasis, vector) -> float:
    """Fraction of a vector's norm lying inside the subspace, in [0, 1]."""
    v = np.asarray(vector, dtype=float).reshape(-1)
    if v.shape[0] != basis.ambient_dim:
        raise DimensionMismatchError(
            f"vector has dimension {v.shape[0]}, basis expects {basis.ambient_dim}"
        )
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise NumericalError("projection ratio of the zero vector is undefined")
    return float(np.linalg.norm(basis.vectors.T @ v) / norm)


def projection_ratios(basis: SubspaceBasis, features) -> np.ndarray:
    """Projection ratios for every column of a feature matrix at once."""
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=float)
    if data.shape[0] != basis.ambient_dim:
        raise DimensionMismatchError(
            f"features have dimension {data.shape[0]}, basis expects {basis.ambient_dim}"
        )
    coords = basis.vectors.T @ data
    norms = np.linalg.norm(data, axis=0)
    if np.any(norms == 0.0):
        raise NumericalError("projection ratio of the zero vector is undefined")
    return np.linalg.norm(coords, axis=0) / norms


def fit_thresholds(
    bases: dict[str, SubspaceBasis],
    learning_features: FeatureMatrix,
    learning_labels: LabelTable,
    grid_step: float = DEFAULT_GRID_STEP,
    workers: int = 1,
) -> ThresholdTable:
    """Fit one ratio threshold per affordance on the learning set.

    For affordance i, every learning vector is scored against basis i; the
    scores split into labeled and unlabeled populations and the sweep picks
    the ts-minimizing threshold on {0, grid_step, ..., 1}. Affordances with
    an empty population (or no basis) come back disabled rather than
    raising, since the remaining labels are still usable.
    """
    catalog = learning_labels.catalog
    grid = threshold_grid(grid_step, upper=1.0)
    truth = learning_labels.matrix(order=learning_features.scene_ids)

    def fit_one(item) -> ThresholdEntry:
        pos, name = item
        mask = truth[:, pos]
        n_lab = int(mask.sum())
        n_unl = int((~mask).sum())
        if n_lab == 0 or n_unl == 0:
            side = "labeled" if n_lab == 0 else "unlabeled"
            return ThresholdEntry(
                affordance=name,
                enabled=False,
                reason=f"no {side} learning vectors; threshold undefined",
                n_labeled=n_lab,
                n_unlabeled=n_unl,
            )
        basis = bases.get(name)
        if basis is None:
            return ThresholdEntry(
                affordance=name, enabled=False, reason="no fitted basis"
            )
        ratios = projection_ratios(basis, learning_features)
        th, tpr, fpr, ts, curve = sweep_thresholds(
            ratios[mask], ratios[~mask], grid, positive="ge"
        )
        return ThresholdEntry(
            affordance=name,
            enabled=True,
            threshold=th,
            tpr=tpr,
            fpr=fpr,
            ts=ts,
            n_labeled=n_lab,
            n_unlabeled=n_unl,
            curve=curve,
        )

    entries = thread_map(fit_one, enumerate(catalog.labels), workers=workers)
    return ThresholdTable(
        catalog=catalog, entries={e.affordance: e for e in entries}
    )


def label_spm(
    bases: dict[str, SubspaceBasis],
    thresholds: ThresholdTable,
    validation: FeatureMatrix,
    workers: int = 1,
) -> Assignments:
    """Assign every affordance whose projection ratio strictly exceeds its threshold.

    Empty label sets are legal; disabled affordances never fire. The
    per-affordance computation is independent and shape-identical at any
    worker count, so results do not depend on `workers`.
    """
    catalog = thresholds.catalog

    def score_one(name: str) -> np.ndarray:
        entry = thresholds[name]
        if not entry.enabled:
            return np.zeros(validation.n_scenes, dtype=bool)
        ratios = projection_ratios(bases[name], validation)
        return ratios > entry.threshold

    columns = thread_map(score_one, catalog.labels, workers=workers)
    matrix = (
        np.stack(columns, axis=1)
        if columns
        else np.zeros((validation.n_scenes, 0), dtype=bool)
    )
    return Assignments(
        catalog=catalog, scene_ids=validation.scene_ids, matrix=matrix
    )


# ---------------------------------------------------------------------------
# fitted-model container


@dataclass
class SpmModel:
    """Fitted SPM: per-affordance bases plus their thresholds."""

    catalog: AffordanceCatalog
    policy: DimPolicy
    grid_step: float
    bases: dict[str, SubspaceBasis]
    thresholds: ThresholdTable

    def enabled(self) -> tuple[str, ...]:
        return self.thresholds.enabled()


def fit_spm(
    learning_features: FeatureMatrix,
    learning_labels: LabelTable,
    catalog: AffordanceCatalog | None = None,
    policy: DimPolicy | None = None,
    grid_step: float = DEFAULT_GRID_STEP,
    workers: int = 1,
) -> SpmModel:
    """Fit bases and thresholds for every affordance on the learning set."""
    catalog = catalog or learning_labels.catalog
    policy = policy or DimPolicy()
    groups = group_by_affordance(learning_features, learning_labels, catalog)
    bases: dict[str, SubspaceBasis] = {}

    def fit_one(name: str):
        group = groups.groups[name]
        if group.n_scenes == 0:
            return name, None
        return name, fit_subspace(group, policy, affordance=name)

    for name, basis in thread_map(fit_one, catalog.labels, workers=workers):
        if basis is not None:
            bases[name] = basis
    thresholds = fit_thresholds(
        bases, learning_features, learning_labels, grid_step, workers=workers
    )
    return SpmModel(
        catalog=catalog,
        policy=policy,
        grid_step=grid_step,
        bases=bases,
        thresholds=thresholds,
    )


def _safe_name(index: int, label: str) -> str:
    return f"{index:03d}_" + re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_")


def save_spm_model(model: SpmModel, path) -> None:
    """Write the model directory: model.json plus one basis array per affordance.

    Basis arrays are stored as float64 NPY files so the orthonormality of
    the loaded basis matches the fitted one bit for bit; feature files stay
    float32, models do not.
    """
    root = Path(path)
    (root / "arrays").mkdir(parents=True, exist_ok=True)
    affordances = []
    for pos, name in enumerate(model.catalog.labels):
        entry = model.thresholds[name]
        rec = {
            "label": name,
            "enabled": entry.enabled,
            "reason": entry.reason,
            "threshold": entry.threshold,
            "tpr": entry.tpr,
            "fpr": entry.fpr,
            "ts": entry.ts,
            "n_labeled": entry.n_labeled,
            "n_unlabeled": entry.n_unlabeled,
            "d": None,
            "basis_file": None,
            "singular_values_file": None,
        }
        basis = model.bases.get(name)
        if basis is not None:
            stem = _safe_name(pos, name)
            rec["d"] = basis.dim
            rec["basis_file"] = f"arrays/{stem}.basis.npy"
            rec["singular_values_file"] = f"arrays/{stem}.sv.npy"
            np.save(root / rec["basis_file"], basis.vectors)
            np.save(root / rec["singular_values_file"], basis.singular_values)
        affordances.append(rec)
    write_json(
        root / "model.json",
        {
            "format": "afflabel-spm-v1",
            "catalog": {
                "labels": list(model.catalog.labels),
                "aliases": dict(model.catalog.aliases),
            },
            "policy": {
                "mode": model.policy.mode,
                "value": model.policy.value,
                "cap": model.policy.cap,
            },
            "grid_step": model.grid_step,
            "affordances": affordances,
        },
    )


def load_spm_model(path) -> SpmModel:
    root = Path(path)
    meta = read_json(root / "model.json")
    if meta.get("format") != "afflabel-spm-v1":
        raise ValidationError(f"{path}: not an SPM model directory")
    catalog = AffordanceCatalog(
        labels=tuple(meta["catalog"]["labels"]),
        aliases=dict(meta["catalog"].get("aliases", {})),
    )
    policy = DimPolicy(**meta["policy"])
    bases: dict[str, SubspaceBasis] = {}
    entries: dict[str, ThresholdEntry] = {}
    for rec in meta["affordances"]:
        name = rec["label"]
        entries[name] = ThresholdEntry(
            affordance=name,
            enabled=rec["enabled"],
            threshold=rec["threshold"],
            tpr=rec["tpr"],
            fpr=rec["fpr"],
            ts=rec["ts"],
            reason=rec["reason"],
            n_labeled=rec.get("n_labeled", 0),
            n_unlabeled=rec.get("n_unlabeled", 0),
        )
        if rec["basis_file"] is not None:
            bases[name] = SubspaceBasis(
                affordance=name,
                vectors=np.load(root / rec["basis_file"]),
                singular_values=np.load(root / rec["singular_values_file"]),
            )
    return SpmModel(
        catalog=catalog,
        policy=policy,
        grid_step=meta["grid_step"],
        bases=bases,
        thresholds=ThresholdTable(catalog=catalog, entries=entries),
    )
