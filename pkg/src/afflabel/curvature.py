"""Manifold curvature method (MCM).

A query vector is scored against an affordance cluster by measuring how
much the cluster's local principal subspace distorts when the query is
appended to its nearest neighbors. With skinny SVDs

    M  = [j | p_1 ... p_n] = U S V^T        (neighbors plus query)
    M~ = [p_1 ... p_n]     = U~ S~ V~^T     (neighbors only)

the weighted alignment matrix R = (U S)^T (U~ S~) is decomposed again, and
the angle statistic is

    theta_w = arccos( sum_k s''_k / sum_k s_k s~_k ),  k = 1..min(rank, rank~)

where s''_k are the singular values of R. Identical subspaces give 0,
orthogonal ones pi/2; a query is labeled where theta_w <= the affordance's
fitted angle threshold (inclusive). The unweighted diagonal sum of U^T U~
is kept as a diagnostic only: for agreeing subspaces it exceeds 1 and its
arccos must be clamped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import AffordanceCatalog
from .errors import DimensionMismatchError, NumericalError, ValidationError
from .roc import ThresholdEntry, ThresholdTable, sweep_thresholds, threshold_grid
from .store import (
    AffordanceGroups,
    Assignments,
    FeatureMatrix,
    LabelTable,
    group_by_affordance,
    load_dataset,
)
from .util import read_json, thread_map, write_json

DEFAULT_NEIGHBORS = 16
DEFAULT_TAU_RANK = 1e-10
DEFAULT_ANGLE_GRID_STEP = 1e-3

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class NeighborhoodPair:
    """A query vector with its n nearest cluster vectors.

    `neighbors` holds the n cluster columns sorted by ascending distance to
    the query (ties by cluster column index); `augmented` is the same
    matrix with the query prepended as its first column.
    """

    query: np.ndarray
    neighbors: np.ndarray
    augmented: np.ndarray
    indices: np.ndarray

    @property
    def n(self) -> int:
        return self.neighbors.shape[1]


@dataclass(frozen=True)
class SkinnySvd:
    """SVD truncated to the singular values above the rank tolerance."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size


@dataclass(frozen=True)
class AngleResult:
    """Curvature statistic for one (query, cluster) pair.

    weighted_angle is the operational statistic; raw_angle is the
    unweighted diagnostic whose arccos argument routinely leaves [-1, 1]
    (raw_clamped marks that). numerator/denominator expose the two sums
    feeding weighted_angle.
    """

    weighted_angle: float
    raw_angle: float
    numerator: float
    denominator: float
    weighted_clamped: bool
    raw_clamped: bool


def nearest_neighbors(cluster, query, n: int) -> NeighborhoodPair:
    """Exact n nearest cluster columns to the query, by L2 distance.

    Ties resolve toward the lower cluster column index (stable sort).
    """
    data = cluster.data if isinstance(cluster, FeatureMatrix) else np.asarray(cluster, dtype=float)
    q = np.asarray(query, dtype=float).reshape(-1)
    if n < 1:
        raise ValidationError(f"neighbor count must be >= 1, got {n}")
    if data.shape[1] < n:
        raise ValidationError(
            f"cluster has {data.shape[1]} vectors, fewer than n={n}"
        )
    if data.shape[0] != q.shape[0]:
        raise DimensionMismatchError(
            f"query has dimension {q.shape[0]}, cluster has {data.shape[0]}"
        )
    dists = np.linalg.norm(data - q[:, None], axis=0)
    order = np.argsort(dists, kind="stable")[:n]
    neighbors = data[:, order]
    return NeighborhoodPair(
        query=q,
        neighbors=neighbors,
        augmented=np.concatenate([q[:, None], neighbors], axis=1),
        indices=order,
    )


def skinny_svd(a, tau_rank: float = DEFAULT_TAU_RANK) -> SkinnySvd:
    """SVD keeping only singular values above tau_rank * sigma_max."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError("skinny SVD needs a non-empty 2-D matrix")
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return SkinnySvd(u=u[:, :0], sigma=s[:0], vt=vt[:0])
    r = int(np.count_nonzero(s > tau_rank * s[0]))
    return SkinnySvd(u=u[:, :r].copy(), sigma=s[:r].copy(), vt=vt[:r].copy())


def curvature_angle(
    augmented, neighbors=None, tau_rank: float = DEFAULT_TAU_RANK
) -> AngleResult:
    """Angle statistics between a neighborhood and its query-augmented version.

    Accepts a NeighborhoodPair, or the two matrices directly (augmented
    first). Raises NumericalError when either matrix is numerically zero.
    """
    if isinstance(augmented, NeighborhoodPair):
        if neighbors is not None:
            raise ValidationError("pass either a pair or two matrices, not both")
        neighbors = augmented.neighbors
        augmented = augmented.augmented
    aug = skinny_svd(augmented, tau_rank)
    nei = skinny_svd(neighbors, tau_rank)
    if aug.rank == 0 or nei.rank == 0:
        raise NumericalError("degenerate all-zero neighborhood")

    weighted = (aug.u * aug.sigma).T @ (nei.u * nei.sigma)
    cross_sv = np.linalg.svd(weighted, compute_uv=False)
    k = min(aug.rank, nei.rank)
    numerator = float(cross_sv.sum())
    denominator = float((aug.sigma[:k] * nei.sigma[:k]).sum())
    arg = numerator / denominator
    weighted_clamped = not -1.0 <= arg <= 1.0
    weighted_angle = math.acos(min(1.0, max(-1.0, arg)))

    raw_sum = float(np.diagonal(aug.u.T @ nei.u).sum())
    raw_clamped = not -1.0 <= raw_sum <= 1.0
    raw_angle = math.acos(min(1.0, max(-1.0, raw_sum)))

    return AngleResult(
        weighted_angle=weighted_angle,
        raw_angle=raw_angle,
        numerator=numerator,
        denominator=denominator,
        weighted_clamped=weighted_clamped,
        raw_clamped=raw_clamped,
    )


# ---------------------------------------------------------------------------
# fitted-model container


@dataclass
class CurvatureModel:
    """Fitted MCM: learning clusters, neighbor count, and angle thresholds."""

    catalog: AffordanceCatalog
    clusters: AffordanceGroups
    n: int
    tau_rank: float
    grid_step: float
    thresholds: ThresholdTable
    learning_features_path: str | None = None
    learning_labels_path: str | None = None
    clamp_events: int = 0

    def enabled(self) -> tuple[str, ...]:
        return self.thresholds.enabled()


def _cluster_angles(
    cluster: FeatureMatrix,
    features: FeatureMatrix,
    member_ids: set[str],
    n: int,
    tau_rank: float,
):
    """theta_w of every feature column against one cluster.

    Cluster members are scored leave-one-out: their own column is removed
    from the cluster before the neighbor search. Returns (angles, clamps).
    """
    angles = np.empty(features.n_scenes)
    clamps = 0
    col_of = {sid: i for i, sid in enumerate(cluster.scene_ids)}
    for s, sid in enumerate(features.scene_ids):
        query = features.data[:, s]
        if sid in member_ids:
            keep = np.arange(cluster.n_scenes) != col_of[sid]
            pair = nearest_neighbors(cluster.data[:, keep], query, n)
        else:
            pair = nearest_neighbors(cluster, query, n)
        res = curvature_angle(pair, tau_rank=tau_rank)
        angles[s] = res.weighted_angle
        clamps += int(res.weighted_clamped)
    return angles, clamps


def fit_mcm_threshold(
    clusters: AffordanceGroups,
    learning_features: FeatureMatrix,
    learning_labels: LabelTable,
    n: int = DEFAULT_NEIGHBORS,
    grid_step: float = DEFAULT_ANGLE_GRID_STEP,
    tau_rank: float = DEFAULT_TAU_RANK,
    workers: int = 1,
) -> tuple[ThresholdTable, int]:
    """Fit one angle threshold per affordance on the learning set.

    Member vectors are scored leave-one-out against their own cluster,
    non-members against the full cluster; the sweep then minimizes ts over
    an angle grid on [0, pi/2] (in radians). Clusters smaller than n+1
    come back disabled. Returns the table and the count of arccos
    clamping events seen while scoring.
    """
    catalog = learning_labels.catalog
    grid = threshold_grid(grid_step, upper=HALF_PI)
    truth = learning_labels.matrix(order=learning_features.scene_ids)

    def fit_one(item) -> tuple[ThresholdEntry, int]:
        pos, name = item
        cluster = clusters.groups[name]
        if cluster.n_scenes < n + 1:
            return (
                ThresholdEntry(
                    affordance=name,
                    enabled=False,
                    reason=(
                        f"cluster has {cluster.n_scenes} vectors; needs at least "
                        f"{n + 1} for leave-one-out with n={n}"
                    ),
                ),
                0,
            )
        mask = truth[:, pos]
        n_lab = int(mask.sum())
        n_unl = int((~mask).sum())
        if n_lab == 0 or n_unl == 0:
            side = "labeled" if n_lab == 0 else "unlabeled"
            return (
                ThresholdEntry(
                    affordance=name,
                    enabled=False,
                    reason=f"no {side} learning vectors; threshold undefined",
                    n_labeled=n_lab,
                    n_unlabeled=n_unl,
                ),
                0,
            )
        angles, clamps = _cluster_angles(
            cluster, learning_features, set(cluster.scene_ids), n, tau_rank
        )
        th, tpr, fpr, ts, curve = sweep_thresholds(
            angles[mask], angles[~mask], grid, positive="le"
        )
        return (
            ThresholdEntry(
                affordance=name,
                enabled=True,
                threshold=th,
                tpr=tpr,
                fpr=fpr,
                ts=ts,
                n_labeled=n_lab,
                n_unlabeled=n_unl,
                curve=curve,
            ),
            clamps,
        )

    results = thread_map(fit_one, enumerate(catalog.labels), workers=workers)
    table = ThresholdTable(
        catalog=catalog, entries={e.affordance: e for e, _ in results}
    )
    return table, sum(c for _, c in results)


def fit_mcm(
    learning_features: FeatureMatrix,
    learning_labels: LabelTable,
    catalog: AffordanceCatalog | None = None,
    n: int = DEFAULT_NEIGHBORS,
    grid_step: float = DEFAULT_ANGLE_GRID_STEP,
    tau_rank: float = DEFAULT_TAU_RANK,
    workers: int = 1,
    learning_features_path=None,
    learning_labels_path=None,
) -> CurvatureModel:
    """Group the learning set into clusters and fit all angle thresholds."""
    if n < 2:
        raise ValidationError(f"neighbor count must be >= 2, got {n}")
    catalog = catalog or learning_labels.catalog
    clusters = group_by_affordance(learning_features, learning_labels, catalog)
    thresholds, clamps = fit_mcm_threshold(
        clusters,
        learning_features,
        learning_labels,
        n=n,
        grid_step=grid_step,
        tau_rank=tau_rank,
        workers=workers,
    )
    return CurvatureModel(
        catalog=catalog,
        clusters=clusters,
        n=n,
        tau_rank=tau_rank,
        grid_step=grid_step,
        thresholds=thresholds,
        learning_features_path=(
            str(learning_features_path) if learning_features_path else None
        ),
        learning_labels_path=(
            str(learning_labels_path) if learning_labels_path else None
        ),
        clamp_events=clamps,
    )


def label_mcm(
    model: CurvatureModel, validation: FeatureMatrix, workers: int = 1
) -> Assignments:
    """Assign every affordance whose curvature angle is <= its threshold.

    The comparison is inclusive, mirroring the fit-time sweep; empty and
    multi-label outputs are both legal. Per-affordance work is independent
    and shape-identical at any worker count.
    """
    catalog = model.catalog
    if validation.n_scenes and validation.dim != next(
        iter(model.clusters.groups.values())
    ).dim:
        raise DimensionMismatchError(
            f"validation vectors have dimension {validation.dim}; "
            "model clusters disagree"
        )

    def score_one(name: str) -> tuple[np.ndarray, int]:
        entry = model.thresholds[name]
        if not entry.enabled:
            return np.zeros(validation.n_scenes, dtype=bool), 0
        cluster = model.clusters.groups[name]
        out = np.zeros(validation.n_scenes, dtype=bool)
        clamps = 0
        for s in range(validation.n_scenes):
            pair = nearest_neighbors(cluster, validation.data[:, s], model.n)
            res = curvature_angle(pair, tau_rank=model.tau_rank)
            out[s] = res.weighted_angle <= entry.threshold
            clamps += int(res.weighted_clamped)
        return out, clamps

    results = thread_map(score_one, catalog.labels, workers=workers)
    clamp_total = sum(c for _, c in results)
    if clamp_total:
        warnings.warn(
            f"{clamp_total} arccos arguments fell outside [-1, 1] and were clamped",
            stacklevel=2,
        )
    columns = [col for col, _ in results]
    matrix = (
        np.stack(columns, axis=1)
        if columns
        else np.zeros((validation.n_scenes, 0), dtype=bool)
    )
    return Assignments(
        catalog=catalog, scene_ids=validation.scene_ids, matrix=matrix
    )


def save_mcm_model(model: CurvatureModel, path) -> None:
    """Write the MCM model JSON; clusters are referenced, not copied.

    The learning feature/label paths must have been provided at fit time;
    relative paths are resolved against the model file's directory on load.
    """
    if not model.learning_features_path or not model.learning_labels_path:
        raise ValidationError(
            "MCM model has no learning-file references; refit with "
            "learning_features_path/learning_labels_path to save it"
        )
    affordances = []
    for name in model.catalog.labels:
        entry = model.thresholds[name]
        affordances.append(
            {
                "label": name,
                "enabled": entry.enabled,
                "reason": entry.reason,
                "threshold": entry.threshold,
                "tpr": entry.tpr,
                "fpr": entry.fpr,
                "ts": entry.ts,
                "n_labeled": entry.n_labeled,
                "n_unlabeled": entry.n_unlabeled,
            }
        )
    write_json(
        path,
        {
            "format": "afflabel-mcm-v1",
            "catalog": {
                "labels": list(model.catalog.labels),
                "aliases": dict(model.catalog.aliases),
            },
            "n": model.n,
            "tau_rank": model.tau_rank,
            "grid_step": model.grid_step,
            "learning_features": model.learning_features_path,
            "learning_labels": model.learning_labels_path,
            "clamp_events": model.clamp_events,
            "affordances": affordances,
        },
    )


def load_mcm_model(path) -> CurvatureModel:
    """Load an MCM model, reconstructing clusters from the referenced files."""
    meta = read_json(path)
    if meta.get("format") != "afflabel-mcm-v1":
        raise ValidationError(f"{path}: not an MCM model file")
    catalog = AffordanceCatalog(
        labels=tuple(meta["catalog"]["labels"]),
        aliases=dict(meta["catalog"].get("aliases", {})),
    )
    base = Path(path).parent
    feat_path = Path(meta["learning_features"])
    label_path = Path(meta["learning_labels"])
    if not feat_path.is_absolute():
        feat_path = base / feat_path
    if not label_path.is_absolute():
        label_path = base / label_path
    features, labels = load_dataset(feat_path, label_path, catalog)
    clusters = group_by_affordance(features, labels, catalog)
    entries = {
        rec["label"]: ThresholdEntry(
            affordance=rec["label"],
            enabled=rec["enabled"],
            threshold=rec["threshold"],
            tpr=rec["tpr"],
            fpr=rec["fpr"],
            ts=rec["ts"],
            reason=rec["reason"],
            n_labeled=rec.get("n_labeled", 0),
            n_unlabeled=rec.get("n_unlabeled", 0),
        )
        for rec in meta["affordances"]
    }
    return CurvatureModel(
        catalog=catalog,
        clusters=clusters,
        n=meta["n"],
        tau_rank=meta["tau_rank"],
        grid_step=meta["grid_step"],
        thresholds=ThresholdTable(catalog=catalog, entries=entries),
        learning_features_path=meta["learning_features"],
        learning_labels_path=meta["learning_labels"],
        clamp_events=meta.get("clamp_events", 0),
    )
