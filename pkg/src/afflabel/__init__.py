"""Training-free multi-label affordance labeling for feature vectors.

Two methods over the same data model: SPM scores vectors by the fraction
of their norm captured by per-affordance SVD subspaces; MCM scores them by
how much a query distorts the local principal subspace of its nearest
cluster neighbors. Both pick per-affordance decision thresholds by
minimizing the ROC distance to the perfect corner, and both are evaluated
with pooled-count TPR/FPR reports.
"""

from .catalog import (
    CANONICAL_ALIASES,
    CANONICAL_LABELS,
    AffordanceCatalog,
    load_catalog,
    save_catalog,
)
from .curvature import (
    AngleResult,
    CurvatureModel,
    NeighborhoodPair,
    SkinnySvd,
    curvature_angle,
    fit_mcm,
    fit_mcm_threshold,
    label_mcm,
    load_mcm_model,
    nearest_neighbors,
    save_mcm_model,
    skinny_svd,
)
from .errors import (
    AffLabelError,
    DataError,
    DimensionMismatchError,
    FormatError,
    NumericalError,
    UnknownLabelError,
    ValidationError,
)
from .evaluation import (
    ConfusionCounts,
    EvalReport,
    ReportDiff,
    aggregate_rates,
    compare_reports,
    confusion_counts,
    load_report,
    save_report,
    tpr_fpr,
)
from .oracles import oracle_angle, oracle_projection
from .roc import (
    SweepCurve,
    ThresholdEntry,
    ThresholdTable,
    sweep_thresholds,
    threshold_grid,
    threshold_score,
)
from .store import (
    AffordanceGroups,
    Assignments,
    FeatureMatrix,
    LabelTable,
    SplitSpec,
    group_by_affordance,
    load_dataset,
    load_feature_matrix,
    load_labels,
    load_predictions,
    save_feature_matrix,
    save_labels,
    save_predictions,
    split_dataset,
)
from .subspace import (
    DimPolicy,
    SpmModel,
    SubspaceBasis,
    fit_spm,
    fit_subspace,
    fit_thresholds,
    label_spm,
    load_spm_model,
    projection_ratio,
    projection_ratios,
    save_spm_model,
)
from .synth import (
    CurvedGroundTruth,
    SubspaceGroundTruth,
    SynthSpec,
    gen_curved_manifold,
    gen_union_of_subspaces,
)

__version__ = "0.1.0"
