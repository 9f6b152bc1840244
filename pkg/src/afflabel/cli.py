"""Command-line pipeline: synth -> split -> fit -> label -> eval -> compare.

Exit codes: 0 success (including per-affordance warnings), 1 usage error,
2 data/validation error, 3 numerical failure. A JSON config file can
supply any flag's value (snake_case keys per subcommand flag); explicit
flags win. AFFLABEL_THREADS sets the default parallelism degree.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import curvature, evaluation, subspace, synth
from .catalog import AffordanceCatalog, load_catalog, save_catalog
from .errors import AffLabelError, DataError, NumericalError, ValidationError
from .roc import ThresholdTable
from .store import (
    SplitSpec,
    load_dataset,
    load_feature_matrix,
    load_labels,
    load_predictions,
    save_feature_matrix,
    save_labels,
    save_predictions,
    split_dataset,
)
from .util import default_workers, file_sha256, json_sha256, read_json, write_json


class UsageError(AffLabelError):
    """Bad or missing command-line/config parameters (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the engine's contract reserves 2
    # for data errors, so remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _resolve(args, config: dict, key: str, default=None, required: bool = False):
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    if required and value is None:
        raise UsageError(f"missing required parameter --{key.replace('_', '-')}")
    return value


def _resolve_workers(args, config) -> int:
    value = _resolve(args, config, "parallel")
    if value is None:
        return default_workers()
    workers = int(value)
    if workers < 1:
        raise UsageError("--parallel must be >= 1")
    return workers


def _require_files(*paths) -> None:
    for p in paths:
        if not Path(p).exists():
            raise ValidationError(f"input file not found: {p}")


def _load_catalog_arg(path) -> AffordanceCatalog:
    if path is None:
        return AffordanceCatalog.canonical()
    _require_files(path)
    return load_catalog(path)


def _write_manifest(path, command: str, params: dict, inputs: dict, outputs: dict, seed=None) -> None:
    content = {
        "command": command,
        "params": params,
        "seed": seed,
        "inputs": {name: file_sha256(p) for name, p in inputs.items()},
        "outputs": {name: file_sha256(p) for name, p in outputs.items()},
    }
    manifest = dict(content)
    manifest["content_hash"] = json_sha256(content)
    manifest["created_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    write_json(path, manifest)


def _fit_log_rows(table: ThresholdTable, extra: dict) -> list[dict]:
    rows = []
    for name in table.catalog.labels:
        e = table[name]
        row = {
            "label": name,
            "enabled": e.enabled,
            "reason": e.reason,
            "threshold": e.threshold,
            "tpr": e.tpr,
            "fpr": e.fpr,
            "ts": e.ts,
            "n_labeled": e.n_labeled,
            "n_unlabeled": e.n_unlabeled,
        }
        row.update(extra.get(name, {}))
        rows.append(row)
    return rows


def _write_roc_csv(path, table: ThresholdTable) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["affordance", "threshold", "tpr", "fpr", "ts"])
        for name in table.catalog.labels:
            entry = table[name]
            if entry.curve is None:
                continue
            for t, tpr, fpr, ts in zip(
                entry.curve.thresholds, entry.curve.tpr, entry.curve.fpr, entry.curve.ts
            ):
                writer.writerow([name, repr(float(t)), repr(float(tpr)), repr(float(fpr)), repr(float(ts))])


# ---------------------------------------------------------------------------
# subcommands


def cmd_split(args, config) -> int:
    features_path = _resolve(args, config, "features", required=True)
    labels_path = _resolve(args, config, "labels", required=True)
    n_learning = int(_resolve(args, config, "n_learning", required=True))
    seed = int(_resolve(args, config, "seed", 0))
    strategy = _resolve(args, config, "strategy", "shuffled")
    out_dir = Path(_resolve(args, config, "out_dir", required=True))
    _require_files(features_path, labels_path)
    catalog = _load_catalog_arg(_resolve(args, config, "catalog"))

    features, labels = load_dataset(features_path, labels_path, catalog)
    spec = SplitSpec(n_learning=n_learning, seed=seed, strategy=strategy)
    (learn_f, learn_l), (valid_f, valid_l) = split_dataset(features, labels, spec)

    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "learning_features": out_dir / "learning.features.npy",
        "learning_labels": out_dir / "learning.labels.jsonl",
        "validation_features": out_dir / "validation.features.npy",
        "validation_labels": out_dir / "validation.labels.jsonl",
    }
    save_feature_matrix(learn_f, paths["learning_features"])
    save_labels(learn_l, paths["learning_labels"])
    save_feature_matrix(valid_f, paths["validation_features"])
    save_labels(valid_l, paths["validation_labels"])
    _write_manifest(
        out_dir / "manifest.json",
        "split",
        {"n_learning": n_learning, "strategy": strategy},
        {"features": features_path, "labels": labels_path},
        paths,
        seed=seed,
    )
    print(
        f"split: {learn_f.n_scenes} learning / {valid_f.n_scenes} validation "
        f"scenes -> {out_dir}"
    )
    return 0


def cmd_fit(args, config) -> int:
    method = _resolve(args, config, "method", required=True)
    features_path = _resolve(args, config, "features", required=True)
    labels_path = _resolve(args, config, "labels", required=True)
    out = Path(_resolve(args, config, "out", required=True))
    grid_step = float(_resolve(args, config, "grid_step", subspace.DEFAULT_GRID_STEP))
    workers = _resolve_workers(args, config)
    roc_csv = _resolve(args, config, "roc_csv")
    _require_files(features_path, labels_path)
    catalog = _load_catalog_arg(_resolve(args, config, "catalog"))
    features, labels = load_dataset(features_path, labels_path, catalog)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if method == "spm":
            policy = subspace.DimPolicy.parse(
                str(_resolve(args, config, "policy", "energy:0.95")),
                cap=int(_resolve(args, config, "cap", 64)),
            )
            model = subspace.fit_spm(
                features, labels, catalog, policy, grid_step, workers=workers
            )
            subspace.save_spm_model(model, out)
            table = model.thresholds
            extra = {
                name: {"d": model.bases[name].dim if name in model.bases else None}
                for name in catalog.labels
            }
            log_path = out / "fit_log.json"
            manifest_path = out / "manifest.json"
            params = {
                "method": "spm",
                "policy": policy.describe(),
                "cap": policy.cap,
                "grid_step": grid_step,
            }
        elif method == "mcm":
            n = int(_resolve(args, config, "neighbors", curvature.DEFAULT_NEIGHBORS))
            tau_rank = float(
                _resolve(args, config, "tau_rank", curvature.DEFAULT_TAU_RANK)
            )
            model = curvature.fit_mcm(
                features,
                labels,
                catalog,
                n=n,
                grid_step=grid_step,
                tau_rank=tau_rank,
                workers=workers,
                learning_features_path=_relpath_for_model(features_path, out),
                learning_labels_path=_relpath_for_model(labels_path, out),
            )
            curvature.save_mcm_model(model, out)
            table = model.thresholds
            extra = {name: {"n": n} for name in catalog.labels}
            log_path = Path(str(out) + ".fitlog.json")
            manifest_path = Path(str(out) + ".manifest.json")
            params = {
                "method": "mcm",
                "n": n,
                "tau_rank": tau_rank,
                "grid_step": grid_step,
                "clamp_events": model.clamp_events,
            }
        else:
            raise UsageError(f"unknown method {method!r} (expected spm or mcm)")

    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    disabled = [name for name in catalog.labels if not table[name].enabled]
    for name in disabled:
        print(f"warning: affordance {name!r} disabled: {table[name].reason}", file=sys.stderr)

    write_json(log_path, {"params": params, "affordances": _fit_log_rows(table, extra)})
    if roc_csv:
        _write_roc_csv(roc_csv, table)
    model_file = out / "model.json" if method == "spm" else out
    _write_manifest(
        manifest_path,
        "fit",
        params,
        {"features": features_path, "labels": labels_path},
        {"model": model_file, "fit_log": log_path},
    )
    print(
        f"fit {method}: {len(catalog.labels) - len(disabled)} enabled / "
        f"{len(disabled)} disabled affordances -> {out}"
    )
    return 0


def _relpath_for_model(data_path, model_path) -> str:
    model_dir = Path(model_path).resolve().parent
    try:
        return os.path.relpath(Path(data_path).resolve(), start=model_dir)
    except ValueError:  # different drives
        return str(Path(data_path).resolve())


def _load_any_model(path):
    p = Path(path)
    if p.is_dir():
        return "spm", subspace.load_spm_model(p)
    meta = read_json(p)
    fmt = meta.get("format", "")
    if fmt == "afflabel-mcm-v1":
        return "mcm", curvature.load_mcm_model(p)
    raise ValidationError(f"{path}: unrecognized model format {fmt!r}")


def cmd_label(args, config) -> int:
    model_path = _resolve(args, config, "model", required=True)
    features_path = _resolve(args, config, "features", required=True)
    labels_path = _resolve(args, config, "labels", required=True)
    out = Path(_resolve(args, config, "out", required=True))
    workers = _resolve_workers(args, config)
    _require_files(model_path, features_path, labels_path)

    kind, model = _load_any_model(model_path)
    features = load_feature_matrix(features_path, labels_path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if kind == "spm":
            assignments = subspace.label_spm(
                model.bases, model.thresholds, features, workers=workers
            )
        else:
            assignments = curvature.label_mcm(model, features, workers=workers)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    save_predictions(assignments, out)
    _write_manifest(
        Path(str(out) + ".manifest.json"),
        "label",
        {"method": kind, "parallel_independent": True},
        {"model": Path(model_path) / "model.json" if kind == "spm" else model_path,
         "features": features_path, "labels": labels_path},
        {"predictions": out},
    )
    n_assigned = int(assignments.matrix.sum())
    print(f"label {kind}: {len(assignments.scene_ids)} scenes, {n_assigned} assignments -> {out}")
    return 0


def cmd_eval(args, config) -> int:
    predictions_path = _resolve(args, config, "predictions", required=True)
    truth_path = _resolve(args, config, "truth", required=True)
    out_json = _resolve(args, config, "out_json", required=True)
    out_table = _resolve(args, config, "out_table")
    _require_files(predictions_path, truth_path)
    catalog = _load_catalog_arg(_resolve(args, config, "catalog"))
    predicted = load_predictions(predictions_path, catalog)
    truth = load_labels(truth_path, catalog)
    counts = evaluation.confusion_counts(predicted, truth)
    report = evaluation.EvalReport(
        counts=counts,
        method=str(_resolve(args, config, "method_tag", "")),
        extractor=str(_resolve(args, config, "extractor_tag", "")),
        vector_size=int(_resolve(args, config, "vector_size", 0)),
    )
    evaluation.save_report(report, out_json, out_table)
    outputs = {"report_json": out_json}
    if out_table:
        outputs["report_table"] = out_table
    _write_manifest(
        Path(str(out_json) + ".manifest.json"),
        "eval",
        {"method_tag": report.method, "extractor_tag": report.extractor},
        {"predictions": predictions_path, "truth": truth_path},
        outputs,
    )
    agg_tpr, agg_fpr = report.aggregate()
    fmt = lambda r: f"{100 * r:.2f}%" if r is not None else "undefined"
    print(f"eval: TPR {fmt(agg_tpr)}  FPR {fmt(agg_fpr)} -> {out_json}")
    return 0


def cmd_synth(args, config) -> int:
    flavor = args.flavor
    dim = int(_resolve(args, config, "dim", required=True))
    groups = int(_resolve(args, config, "groups", required=True))
    d_true = int(_resolve(args, config, "d", required=True))
    points = int(_resolve(args, config, "points_per_group", 500))
    noise = float(_resolve(args, config, "noise", 0.0))
    seed = int(_resolve(args, config, "seed", 0))
    out_features = _resolve(args, config, "out_features", required=True)
    out_labels = _resolve(args, config, "out_labels", required=True)
    out_catalog = _resolve(args, config, "out_catalog")

    if flavor == "subspaces":
        pairs = _parse_pairs(str(_resolve(args, config, "overlap_pairs", "")))
        spec = synth.SynthSpec(
            dim=dim,
            groups=groups,
            d_true=d_true,
            points_per_group=points,
            overlap_pairs=pairs,
            overlap_fraction=float(_resolve(args, config, "overlap_fraction", 0.1 if pairs else 0.0)),
            intersection_dim=int(_resolve(args, config, "intersection_dim", max(1, d_true // 3))),
            noise_sigma=noise,
            seed=seed,
        )
        features, labels, _ = synth.gen_union_of_subspaces(spec)
        params = {
            "flavor": flavor,
            "dim": dim,
            "groups": groups,
            "d_true": d_true,
            "points_per_group": points,
            "noise_sigma": noise,
            "overlap_pairs": ["-".join(map(str, p)) for p in spec.overlap_pairs],
            "overlap_fraction": spec.overlap_fraction,
            "intersection_dim": spec.intersection_dim,
        }
    else:
        spec = synth.SynthSpec(
            dim=dim,
            groups=groups,
            d_true=d_true,
            points_per_group=points,
            noise_sigma=noise,
            curvature="quadratic-embedding",
            quad_scale=float(_resolve(args, config, "quad_scale", 1.0)),
            seed=seed,
        )
        features, labels, _ = synth.gen_curved_manifold(spec)
        params = {
            "flavor": flavor,
            "dim": dim,
            "groups": groups,
            "d_true": d_true,
            "points_per_group": points,
            "noise_sigma": noise,
            "quad_scale": spec.quad_scale,
        }

    save_feature_matrix(features, out_features)
    save_labels(labels, out_labels)
    outputs = {"features": out_features, "labels": out_labels}
    if out_catalog:
        save_catalog(labels.catalog, out_catalog)
        outputs["catalog"] = out_catalog
    _write_manifest(
        Path(str(out_features) + ".manifest.json"),
        "synth",
        params,
        {},
        outputs,
        seed=seed,
    )
    print(
        f"synth {flavor}: {features.n_scenes} scenes of dimension {features.dim} "
        f"-> {out_features}"
    )
    return 0


def _parse_pairs(text: str) -> tuple:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split("-")
        if len(parts) != 2:
            raise UsageError(f"cannot parse overlap pair {chunk!r} (expected A-B)")
        pairs.append((int(parts[0]), int(parts[1])))
    return tuple(pairs)


def cmd_compare(args, config) -> int:
    first = _resolve(args, config, "first", required=True)
    second = _resolve(args, config, "second", required=True)
    out_json = _resolve(args, config, "out_json", required=True)
    out_table = _resolve(args, config, "out_table")
    _require_files(first, second)
    diff = evaluation.compare_reports(
        evaluation.load_report(first), evaluation.load_report(second)
    )
    write_json(out_json, diff.to_dict())
    if out_table:
        with open(out_table, "w", encoding="utf-8") as fh:
            fh.write(diff.render_table())
    agg = diff.aggregate
    fmt = lambda d: f"{100 * d:+.2f}pp" if d is not None else "undefined"
    print(f"compare: dTPR {fmt(agg['tpr'])}  dFPR {fmt(agg['fpr'])} -> {out_json}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="afflabel", description=__doc__)
    parser.add_argument("--config", help="JSON file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("split", help="partition a dataset into learning/validation files")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--catalog")
    p.add_argument("--n-learning", dest="n_learning", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--strategy", choices=["shuffled", "sequential"])
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", help="fit an SPM or MCM model on a learning set")
    p.add_argument("--method", choices=["spm", "mcm"])
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--catalog")
    p.add_argument("--out")
    p.add_argument("--policy", help="SPM dimension policy, e.g. energy:0.95 or fixed:8")
    p.add_argument("--cap", type=int, help="SPM dimension cap")
    p.add_argument("--neighbors", type=int, help="MCM neighbor count n")
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--tau-rank", dest="tau_rank", type=float)
    p.add_argument("--roc-csv", dest="roc_csv", help="write the full threshold sweep as CSV")
    p.add_argument("--parallel", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("label", help="assign affordance labels with a fitted model")
    p.add_argument("--model")
    p.add_argument("--features")
    p.add_argument("--labels", help="JSON Lines file supplying scene ids")
    p.add_argument("--out")
    p.add_argument("--parallel", type=int)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--predictions")
    p.add_argument("--truth")
    p.add_argument("--catalog")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-table", dest="out_table")
    p.add_argument("--method-tag", dest="method_tag")
    p.add_argument("--extractor-tag", dest="extractor_tag")
    p.add_argument("--vector-size", dest="vector_size", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic benchmark datasets")
    flavor = p.add_subparsers(dest="flavor", metavar="flavor")
    for name in ("subspaces", "manifold"):
        q = flavor.add_parser(name)
        q.add_argument("--dim", type=int)
        q.add_argument("--groups", type=int)
        q.add_argument("--d", type=int, help="intrinsic dimension per group")
        q.add_argument("--points-per-group", dest="points_per_group", type=int)
        q.add_argument("--noise", type=float)
        q.add_argument("--seed", type=int)
        q.add_argument("--out-features", dest="out_features")
        q.add_argument("--out-labels", dest="out_labels")
        q.add_argument("--out-catalog", dest="out_catalog")
        if name == "subspaces":
            q.add_argument("--overlap-pairs", dest="overlap_pairs", help='e.g. "0-1,2-3"')
            q.add_argument("--overlap-fraction", dest="overlap_fraction", type=float)
            q.add_argument("--intersection-dim", dest="intersection_dim", type=int)
        else:
            q.add_argument("--quad-scale", dest="quad_scale", type=float)
        q.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="diff two evaluation reports")
    p.add_argument("--first")
    p.add_argument("--second")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-table", dest="out_table")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 1
    config = {}
    if args.config:
        if not Path(args.config).exists():
            print(f"afflabel: error: config file not found: {args.config}", file=sys.stderr)
            return 1
        config = read_json(args.config)
        if not isinstance(config, dict):
            print("afflabel: error: config file must hold a JSON object", file=sys.stderr)
            return 1
    try:
        return args.func(args, config)
    except UsageError as exc:
        print(f"afflabel: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"afflabel: data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"afflabel: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
