"""Confusion accounting, TPR/FPR rates, and evaluation reports.

Each (scene, affordance) decision contributes exactly one confusion count.
Aggregate rates are micro-averaged: counts are pooled across affordances
first and the rate quotients computed from the pooled sums, so the
aggregate obeys the same TP/(TP+FN) and FP/(FP+TN) definitions as the
per-affordance rates. Zero-denominator rates are reported as undefined
(null in JSON, blank in tables), never as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import AffordanceCatalog
from .errors import ValidationError
from .store import Assignments, LabelTable
from .util import read_json, write_json


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-affordance TP/FP/FN/TN over a fixed scene set."""

    catalog: AffordanceCatalog
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray
    n_scenes: int

    def __post_init__(self):
        width = len(self.catalog)
        for name in ("tp", "fp", "fn", "tn"):
            arr = np.asarray(getattr(self, name), dtype=int)
            object.__setattr__(self, name, arr)
            if arr.shape != (width,) or np.any(arr < 0):
                raise ValidationError(f"{name} counts malformed")
        total = self.tp + self.fp + self.fn + self.tn
        if np.any(total != self.n_scenes):
            raise ValidationError("confusion counts do not sum to the scene count")

    def pooled(self) -> tuple[int, int, int, int]:
        """(TP, FP, FN, TN) summed over affordances."""
        return (
            int(self.tp.sum()),
            int(self.fp.sum()),
            int(self.fn.sum()),
            int(self.tn.sum()),
        )


def confusion_counts(
    predicted: Assignments, truth: LabelTable
) -> ConfusionCounts:
    """Tally per-affordance confusion counts for predictions against truth."""
    if predicted.catalog.labels != truth.catalog.labels:
        raise ValidationError("prediction and truth catalogs differ")
    missing = set(predicted.scene_ids) - set(truth.scene_ids)
    if missing:
        raise ValidationError(
            f"scene {sorted(missing)[0]!r} present in predictions but absent from truth"
        )
    extra = set(truth.scene_ids) - set(predicted.scene_ids)
    if extra:
        raise ValidationError(
            f"scene {sorted(extra)[0]!r} present in truth but absent from predictions"
        )
    pred = predicted.matrix
    true = truth.matrix(order=predicted.scene_ids)
    return ConfusionCounts(
        catalog=predicted.catalog,
        tp=(pred & true).sum(axis=0),
        fp=(pred & ~true).sum(axis=0),
        fn=(~pred & true).sum(axis=0),
        tn=(~pred & ~true).sum(axis=0),
        n_scenes=len(predicted.scene_ids),
    )


def _rate(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def tpr_fpr(counts: ConfusionCounts):
    """Per-affordance (TPR, FPR) lists; None marks an undefined rate."""
    tpr = [
        _rate(int(tp), int(tp + fn))
        for tp, fn in zip(counts.tp, counts.fn)
    ]
    fpr = [
        _rate(int(fp), int(fp + tn))
        for fp, tn in zip(counts.fp, counts.tn)
    ]
    return tpr, fpr


def aggregate_rates(counts: ConfusionCounts):
    """Micro-averaged (TPR, FPR) from pooled counts."""
    tp, fp, fn, tn = counts.pooled()
    return _rate(tp, tp + fn), _rate(fp, fp + tn)


@dataclass
class EvalReport:
    """Evaluation result: stored counts plus the rates derived from them."""

    counts: ConfusionCounts
    method: str = ""
    extractor: str = ""
    vector_size: int = 0
    averaging: str = "micro (pooled counts)"

    @property
    def catalog(self) -> AffordanceCatalog:
        return self.counts.catalog

    def per_affordance(self):
        return tpr_fpr(self.counts)

    def aggregate(self):
        return aggregate_rates(self.counts)

    def to_dict(self) -> dict:
        tpr, fpr = self.per_affordance()
        agg_tpr, agg_fpr = self.aggregate()
        return {
            "format": "afflabel-report-v1",
            "method": self.method,
            "extractor": self.extractor,
            "vector_size": self.vector_size,
            "averaging": self.averaging,
            "n_scenes": self.counts.n_scenes,
            "catalog": {
                "labels": list(self.catalog.labels),
                "aliases": dict(self.catalog.aliases),
            },
            "aggregate": {"tpr": agg_tpr, "fpr": agg_fpr},
            "per_affordance": [
                {
                    "label": name,
                    "tp": int(self.counts.tp[i]),
                    "fp": int(self.counts.fp[i]),
                    "fn": int(self.counts.fn[i]),
                    "tn": int(self.counts.tn[i]),
                    "tpr": tpr[i],
                    "fpr": fpr[i],
                }
                for i, name in enumerate(self.catalog.labels)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        if data.get("format") != "afflabel-report-v1":
            raise ValidationError("not an evaluation report")
        catalog = AffordanceCatalog(
            labels=tuple(data["catalog"]["labels"]),
            aliases=dict(data["catalog"].get("aliases", {})),
        )
        rows = data["per_affordance"]
        counts = ConfusionCounts(
            catalog=catalog,
            tp=np.array([r["tp"] for r in rows]),
            fp=np.array([r["fp"] for r in rows]),
            fn=np.array([r["fn"] for r in rows]),
            tn=np.array([r["tn"] for r in rows]),
            n_scenes=data["n_scenes"],
        )
        report = cls(
            counts=counts,
            method=data.get("method", ""),
            extractor=data.get("extractor", ""),
            vector_size=data.get("vector_size", 0),
            averaging=data.get("averaging", "micro (pooled counts)"),
        )
        # Stored rates must recompute from the stored counts.
        agg = report.aggregate()
        stored = (data["aggregate"]["tpr"], data["aggregate"]["fpr"])
        if stored != agg:
            raise ValidationError(
                f"stored aggregate rates {stored} do not recompute from counts {agg}"
            )
        return report

    def render_table(self) -> str:
        """Aligned-column text table: aggregate row plus a per-affordance block."""

        def pct(rate) -> str:
            return f"{100.0 * rate:.2f}" if rate is not None else "-"

        tpr, fpr = self.per_affordance()
        agg_tpr, agg_fpr = self.aggregate()
        header = ["Method", "Extractor", "Vector Size", "TPR(%)", "FPR(%)"]
        agg_row = [
            self.method or "-",
            self.extractor or "-",
            str(self.vector_size or "-"),
            pct(agg_tpr),
            pct(agg_fpr),
        ]
        widths = [max(len(h), len(v)) for h, v in zip(header, agg_row)]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(header, widths)),
            "  ".join(v.ljust(w) for v, w in zip(agg_row, widths)),
            "",
            f"Per-affordance ({self.averaging} aggregate above, "
            f"{self.counts.n_scenes} scenes):",
        ]
        name_w = max(len("affordance"), max((len(n) for n in self.catalog.labels), default=0))
        lines.append(
            f"{'affordance'.ljust(name_w)}  {'TPR(%)':>7}  {'FPR(%)':>7}"
            f"  {'TP':>6}  {'FP':>6}  {'FN':>6}  {'TN':>6}"
        )
        for i, name in enumerate(self.catalog.labels):
            lines.append(
                f"{name.ljust(name_w)}  {pct(tpr[i]):>7}  {pct(fpr[i]):>7}"
                f"  {self.counts.tp[i]:>6}  {self.counts.fp[i]:>6}"
                f"  {self.counts.fn[i]:>6}  {self.counts.tn[i]:>6}"
            )
        return "\n".join(lines) + "\n"


def save_report(report: EvalReport, json_path, table_path=None) -> None:
    write_json(json_path, report.to_dict())
    if table_path is not None:
        with open(table_path, "w", encoding="utf-8") as fh:
            fh.write(report.render_table())


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(read_json(path))


@dataclass
class ReportDiff:
    """Structured difference of two reports (first minus second)."""

    catalog: AffordanceCatalog
    method_a: str
    method_b: str
    per_affordance: list[dict]
    aggregate: dict

    def to_dict(self) -> dict:
        return {
            "format": "afflabel-report-diff-v1",
            "sign_convention": "delta = first - second",
            "method_a": self.method_a,
            "method_b": self.method_b,
            "aggregate": self.aggregate,
            "per_affordance": self.per_affordance,
        }

    def render_table(self) -> str:
        def fmt(delta) -> str:
            return f"{100.0 * delta:+.2f}" if delta is not None else "-"

        name_w = max(len("affordance"), max((len(n) for n in self.catalog.labels), default=0))
        lines = [
            f"delta = {self.method_a or 'first'} - {self.method_b or 'second'} (percentage points)",
            f"{'affordance'.ljust(name_w)}  {'dTPR':>8}  {'dFPR':>8}",
            f"{'<aggregate>'.ljust(name_w)}  {fmt(self.aggregate['tpr']):>8}  "
            f"{fmt(self.aggregate['fpr']):>8}",
        ]
        for row in self.per_affordance:
            lines.append(
                f"{row['label'].ljust(name_w)}  {fmt(row['tpr']):>8}  {fmt(row['fpr']):>8}"
            )
        return "\n".join(lines) + "\n"


def compare_reports(a: EvalReport, b: EvalReport) -> ReportDiff:
    """Per-affordance and aggregate rate deltas, computed as a minus b.

    A delta is None when either side's rate is undefined.
    """
    if a.catalog.labels != b.catalog.labels:
        raise ValidationError("cannot compare reports with different catalogs")
    if a.counts.n_scenes != b.counts.n_scenes:
        raise ValidationError("cannot compare reports over different scene counts")

    def delta(x, y):
        return x - y if x is not None and y is not None else None

    tpr_a, fpr_a = a.per_affordance()
    tpr_b, fpr_b = b.per_affordance()
    rows = [
        {
            "label": name,
            "tpr": delta(tpr_a[i], tpr_b[i]),
            "fpr": delta(fpr_a[i], fpr_b[i]),
        }
        for i, name in enumerate(a.catalog.labels)
    ]
    agg_a = a.aggregate()
    agg_b = b.aggregate()
    return ReportDiff(
        catalog=a.catalog,
        method_a=a.method,
        method_b=b.method,
        per_affordance=rows,
        aggregate={
            "tpr": delta(agg_a[0], agg_b[0]),
            "fpr": delta(agg_a[1], agg_b[1]),
        },
    )
