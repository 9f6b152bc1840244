"""ROC-style threshold selection shared by both labeling methods.

A threshold's quality is its distance to the perfect corner (TPR=1, FPR=0):

    ts = sqrt((1 - TPR)^2 + FPR^2)

The sweep scans a fixed grid, computes (TPR, FPR, ts) at every grid point,
and keeps the ts-minimizing threshold; exact ties go to the LARGEST
threshold. A score equal to the threshold counts as positive during the
sweep, for both orientations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .catalog import AffordanceCatalog
from .errors import ValidationError


def threshold_score(tpr: float, fpr: float) -> float:
    """Distance of an ROC point to (TPR=1, FPR=0)."""
    if not (0.0 <= tpr <= 1.0 and 0.0 <= fpr <= 1.0):
        raise ValidationError(f"rates must lie in [0,1], got tpr={tpr}, fpr={fpr}")
    return math.sqrt((1.0 - tpr) ** 2 + fpr**2)


def threshold_grid(step: float, upper: float = 1.0) -> np.ndarray:
    """Sweep grid {0, step, 2*step, ...} ending exactly at `upper`."""
    if not 0.0 < step <= 0.5:
        raise ValidationError(f"grid step must be in (0, 0.5], got {step}")
    k = int(round(upper / step))
    if k >= 1 and abs(k * step - upper) <= 1e-9 * max(1.0, upper):
        return np.linspace(0.0, upper, k + 1)
    k = int(math.floor(upper / step + 1e-12))
    grid = np.arange(k + 1, dtype=float) * step
    return np.append(grid, upper)


@dataclass
class SweepCurve:
    """Full (threshold, TPR, FPR, ts) trace of one sweep."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    ts: np.ndarray


@dataclass
class ThresholdEntry:
    """Fitted optimum for one affordance, or the reason it is disabled."""

    affordance: str
    enabled: bool
    threshold: float | None = None
    tpr: float | None = None
    fpr: float | None = None
    ts: float | None = None
    reason: str | None = None
    n_labeled: int = 0
    n_unlabeled: int = 0
    curve: SweepCurve | None = field(default=None, repr=False)


@dataclass
class ThresholdTable:
    """Per-affordance fitted thresholds, keyed in catalog order."""

    catalog: AffordanceCatalog
    entries: dict[str, ThresholdEntry]

    def __getitem__(self, affordance: str) -> ThresholdEntry:
        return self.entries[affordance]

    def enabled(self) -> tuple[str, ...]:
        return tuple(
            name for name in self.catalog.labels if self.entries[name].enabled
        )


def sweep_thresholds(
    labeled_scores,
    unlabeled_scores,
    grid: np.ndarray,
    positive: str = "ge",
) -> tuple[float, float, float, float, SweepCurve]:
    """Scan `grid` and return (threshold, tpr, fpr, ts, curve) at the optimum.

    `positive` selects the orientation: "ge" treats score >= threshold as a
    positive call (projection ratios), "le" treats score <= threshold as
    positive (curvature angles). Ties on ts resolve to the largest
    threshold.
    """
    labeled = np.sort(np.asarray(labeled_scores, dtype=float))
    unlabeled = np.sort(np.asarray(unlabeled_scores, dtype=float))
    if labeled.size == 0 or unlabeled.size == 0:
        raise ValidationError("threshold sweep needs both score populations")
    if positive == "ge":
        tp = labeled.size - np.searchsorted(labeled, grid, side="left")
        fp = unlabeled.size - np.searchsorted(unlabeled, grid, side="left")
    elif positive == "le":
        tp = np.searchsorted(labeled, grid, side="right")
        fp = np.searchsorted(unlabeled, grid, side="right")
    else:
        raise ValidationError(f"positive must be 'ge' or 'le', got {positive!r}")
    tpr = tp / labeled.size
    fpr = fp / unlabeled.size
    ts = np.sqrt((1.0 - tpr) ** 2 + fpr**2)
    if labeled.size == unlabeled.size and np.array_equal(labeled, unlabeled):
        warnings.warn(
            "labeled and unlabeled score populations are identical; "
            "TPR equals FPR at every threshold",
            stacklevel=2,
        )
    best = len(ts) - 1 - int(np.argmin(ts[::-1]))
    curve = SweepCurve(thresholds=grid.copy(), tpr=tpr, fpr=fpr, ts=ts)
    return (
        float(grid[best]),
        float(tpr[best]),
        float(fpr[best]),
        float(ts[best]),
        curve,
    )
