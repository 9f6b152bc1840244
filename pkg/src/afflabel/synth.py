"""Seed-deterministic synthetic benchmarks with known ground truth.

Two generators: a union of linear subspaces (with optional pairwise
intersection subspaces whose points carry both labels) exercising the
subspace-projection assumptions, and curved manifolds built from a random
quadratic embedding of a flat parameter box exercising the local-subspace
assumptions. Both emit the same structures the loaders produce, so
generated data flows through the full pipeline unmodified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import AffordanceCatalog
from .errors import ValidationError
from .store import FeatureMatrix, LabelTable


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic dataset draw."""

    dim: int
    groups: int
    d_true: int
    points_per_group: int
    overlap_pairs: tuple = ()
    overlap_fraction: float = 0.0
    intersection_dim: int = 1
    noise_sigma: float = 0.0
    curvature: str = "linear"  # or "quadratic-embedding"
    quad_scale: float = 1.0
    box_center: float = 0.0
    seed: int = 0
    id_prefix: str = "syn"

    def __post_init__(self):
        if not 0 < self.d_true < self.dim:
            raise ValidationError(
                f"d_true must lie in (0, dim), got {self.d_true} vs dim {self.dim}"
            )
        if self.groups < 1 or self.points_per_group < 1:
            raise ValidationError("groups and points_per_group must be positive")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValidationError("overlap_fraction must lie in [0, 1)")
        if self.curvature not in ("linear", "quadratic-embedding"):
            raise ValidationError(f"unknown curvature mode {self.curvature!r}")
        pairs = tuple(tuple(int(x) for x in p) for p in self.overlap_pairs)
        object.__setattr__(self, "overlap_pairs", pairs)
        for a, b in pairs:
            if a == b or not (0 <= a < self.groups and 0 <= b < self.groups):
                raise ValidationError(f"invalid overlap pair ({a}, {b})")
        if pairs:
            if not 1 <= self.intersection_dim < self.d_true:
                raise ValidationError(
                    "infeasible intersection: intersection_dim must lie in "
                    f"[1, d_true), got {self.intersection_dim}"
                )
            for g in range(self.groups):
                used = self.intersection_dim * sum(g in p for p in pairs)
                if used > self.d_true:
                    raise ValidationError(
                        f"infeasible intersection: group {g} needs {used} "
                        f"intersection dimensions but d_true is {self.d_true}"
                    )


@dataclass(frozen=True)
class SubspaceGroundTruth:
    """True bases behind a union-of-subspaces draw."""

    catalog: AffordanceCatalog
    bases: dict[str, np.ndarray]  # label -> (D, d_true) orthonormal
    intersections: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class CurvedGroundTruth:
    """Embedding matrices behind a curved-manifold draw."""

    catalog: AffordanceCatalog
    linear: dict[str, np.ndarray]  # label -> (D, d_true) orthonormal
    quadratic: dict[str, np.ndarray]  # label -> (D, d_true*(d_true+1)/2)


def _haar_basis(rng: np.random.Generator, dim: int, k: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return q[:, :k]


def gen_union_of_subspaces(
    spec: SynthSpec, ground_truth: SubspaceGroundTruth | None = None
):
    """Points drawn from a union of linear subspaces, plus their labels.

    Group g's points are B_g @ coeffs with standard-normal coefficients;
    a spec-set fraction of each overlapping group's points is drawn from
    the pair's shared intersection subspace instead and carries both
    labels. Passing a previous draw's ground truth reuses its bases, so a
    second call can generate validation points on the same subspaces.
    Everything is a pure function of (spec, ground_truth).
    """
    rng = np.random.default_rng(spec.seed)
    catalog = AffordanceCatalog(
        labels=tuple(f"group{g}" for g in range(spec.groups))
    )
    if ground_truth is None:
        intersections = {
            pair: _haar_basis(rng, spec.dim, spec.intersection_dim)
            for pair in spec.overlap_pairs
        }
        bases = {}
        for g, name in enumerate(catalog.labels):
            parts = [intersections[p] for p in spec.overlap_pairs if g in p]
            used = sum(p.shape[1] for p in parts)
            parts.append(rng.standard_normal((spec.dim, spec.d_true - used)))
            raw = np.concatenate(parts, axis=1)
            q, _ = np.linalg.qr(raw)
            bases[name] = q[:, : spec.d_true]
        ground_truth = SubspaceGroundTruth(
            catalog=catalog, bases=bases, intersections=intersections
        )
    elif tuple(ground_truth.catalog.labels) != tuple(catalog.labels):
        raise ValidationError("ground truth does not match this spec's groups")

    columns = []
    ids = []
    bits: dict[str, frozenset[int]] = {}
    counter = 0
    for g, name in enumerate(catalog.labels):
        my_pairs = [p for p in spec.overlap_pairs if g in p]
        n_overlap = (
            int(round(spec.overlap_fraction * spec.points_per_group))
            if my_pairs
            else 0
        )
        plan = [my_pairs[i % len(my_pairs)] for i in range(n_overlap)]
        plan += [None] * (spec.points_per_group - n_overlap)
        for pair in plan:
            if pair is None:
                x = ground_truth.bases[name] @ rng.standard_normal(spec.d_true)
                labels = frozenset([g])
            else:
                x = ground_truth.intersections[pair] @ rng.standard_normal(
                    spec.intersection_dim
                )
                labels = frozenset(pair)
            sid = f"{spec.id_prefix}{counter:06d}"
            counter += 1
            columns.append(x)
            ids.append(sid)
            bits[sid] = labels
    data = np.stack(columns, axis=1)
    if spec.noise_sigma > 0:
        data = data + rng.normal(0.0, spec.noise_sigma, size=data.shape)
    features = FeatureMatrix(data=data, scene_ids=tuple(ids))
    table = LabelTable(catalog=catalog, scene_ids=tuple(ids), bits=bits)
    return features, table, ground_truth


def _quad_features(t: np.ndarray) -> np.ndarray:
    """All monomials t_i * t_j with i <= j, in triu order."""
    iu = np.triu_indices(t.shape[0])
    return np.outer(t, t)[iu]


def gen_curved_manifold(
    spec: SynthSpec, ground_truth: CurvedGroundTruth | None = None
):
    """Points on random quadratic-embedding manifolds, labeled by membership.

    Each group g embeds the uniform box box_center + [-1, 1]^d_true through
    x = A_g t + quad_scale * W_g q(t) with q the degree-2 monomials, so
    quad_scale 0 degenerates to flat subspaces (offset inside their own
    span when box_center is nonzero, which keeps sampled points away from
    the all-subspaces intersection at the origin). Deterministic per
    (spec, ground_truth), like the linear generator.
    """
    if spec.curvature != "quadratic-embedding":
        raise ValidationError(
            "gen_curved_manifold requires curvature='quadratic-embedding'"
        )
    rng = np.random.default_rng(spec.seed)
    catalog = AffordanceCatalog(
        labels=tuple(f"manifold{g}" for g in range(spec.groups))
    )
    n_quad = spec.d_true * (spec.d_true + 1) // 2
    if ground_truth is None:
        linear = {}
        quadratic = {}
        for name in catalog.labels:
            linear[name] = _haar_basis(rng, spec.dim, spec.d_true)
            quadratic[name] = rng.standard_normal((spec.dim, n_quad)) * (
                spec.quad_scale / np.sqrt(spec.dim)
            )
        ground_truth = CurvedGroundTruth(
            catalog=catalog, linear=linear, quadratic=quadratic
        )
    elif tuple(ground_truth.catalog.labels) != tuple(catalog.labels):
        raise ValidationError("ground truth does not match this spec's groups")

    columns = []
    ids = []
    bits: dict[str, frozenset[int]] = {}
    counter = 0
    for g, name in enumerate(catalog.labels):
        for _ in range(spec.points_per_group):
            t = rng.uniform(-1.0, 1.0, size=spec.d_true) + spec.box_center
            x = ground_truth.linear[name] @ t + ground_truth.quadratic[name] @ _quad_features(t)
            sid = f"{spec.id_prefix}{counter:06d}"
            counter += 1
            columns.append(x)
            ids.append(sid)
            bits[sid] = frozenset([g])
    data = np.stack(columns, axis=1)
    if spec.noise_sigma > 0:
        data = data + rng.normal(0.0, spec.noise_sigma, size=data.shape)
    features = FeatureMatrix(data=data, scene_ids=tuple(ids))
    table = LabelTable(catalog=catalog, scene_ids=tuple(ids), bits=bits)
    return features, table, ground_truth
