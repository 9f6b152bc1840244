"""Feature/label storage: interchange round trips, split, grouping."""

import json

import numpy as np
import pytest

from afflabel import (
    AffordanceCatalog,
    FeatureMatrix,
    LabelTable,
    SplitSpec,
    UnknownLabelError,
    ValidationError,
    group_by_affordance,
    load_feature_matrix,
    load_labels,
    save_feature_matrix,
    save_labels,
    split_dataset,
)
from afflabel.catalog import CANONICAL_LABELS


def write_labels_file(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in rows:
            fh.write(json.dumps(rec) + "\n")


@pytest.fixture
def catalog():
    return AffordanceCatalog.canonical()


class TestCatalog:
    def test_canonical_has_15_fixed_positions(self, catalog):
        assert len(catalog) == 15
        assert catalog.labels == CANONICAL_LABELS
        assert catalog.labels[0] == "grasp"
        assert catalog.labels[-1] == "staple"

    def test_dataset_aliases_resolve(self, catalog):
        assert catalog.index("openable") == catalog.index("open")
        assert catalog.index("illumination") == catalog.index("illuminate")
        assert catalog.index("pourable") == catalog.index("pour")
        assert catalog.index("rollable") == catalog.index("roll")
        assert catalog.index("stapling") == catalog.index("staple")
        assert catalog.index("containment") == catalog.index("contain")
        assert catalog.index("liquid-containment") == catalog.index("liquid contain")

    def test_strict_catalog_rejects_alias(self):
        strict = AffordanceCatalog(labels=CANONICAL_LABELS)
        with pytest.raises(UnknownLabelError):
            strict.index("openable")

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError):
            AffordanceCatalog(labels=("a", "a"))


class TestFeatureMatrix:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((64, 100)).astype(np.float32).astype(np.float64)
        ids = tuple(f"s{i}" for i in range(100))
        m = FeatureMatrix(data=data, scene_ids=ids)
        save_feature_matrix(m, tmp_path / "f.npy")
        back = load_feature_matrix(tmp_path / "f.npy", ids)
        assert back.data.shape == (64, 100)
        assert np.array_equal(back.data, m.data)

    def test_load_reports_stated_shape(self, tmp_path):
        arr = np.ones((3, 512), dtype="<f4")
        np.save(tmp_path / "f.npy", arr)
        m = load_feature_matrix(tmp_path / "f.npy", ["a", "b", "c"])
        assert (m.dim, m.n_scenes) == (512, 3)

    def test_id_count_mismatch(self, tmp_path):
        np.save(tmp_path / "f.npy", np.ones((3, 8), dtype="<f4"))
        with pytest.raises(ValidationError, match="id/column count mismatch"):
            load_feature_matrix(tmp_path / "f.npy", ["a", "b", "c", "d"])

    def test_id_sidecar_file(self, tmp_path):
        np.save(tmp_path / "f.npy", np.ones((2, 4), dtype="<f4"))
        write_labels_file(
            tmp_path / "l.jsonl",
            [{"id": "x", "labels": ["grasp"]}, {"id": "y", "labels": ["cut"]}],
        )
        m = load_feature_matrix(tmp_path / "f.npy", tmp_path / "l.jsonl")
        assert m.scene_ids == ("x", "y")

    def test_zero_vector_rejected(self):
        data = np.ones((4, 3))
        data[:, 1] = 0.0
        with pytest.raises(ValidationError, match="all-zero"):
            FeatureMatrix(data=data, scene_ids=("a", "b", "c"))

    def test_non_finite_rejected(self):
        data = np.ones((4, 2))
        data[2, 1] = np.nan
        with pytest.raises(ValidationError, match="non-finite"):
            FeatureMatrix(data=data, scene_ids=("a", "b"))

    def test_wrong_dtype_rejected(self, tmp_path):
        np.save(tmp_path / "f.npy", np.ones((3, 4), dtype=np.float64))
        from afflabel import FormatError

        with pytest.raises(FormatError, match="dtype"):
            load_feature_matrix(tmp_path / "f.npy", ["a", "b", "c"])


class TestLabels:
    def test_basic_bits(self, tmp_path, catalog):
        write_labels_file(tmp_path / "l.jsonl", [{"id": "s1", "labels": ["grasp", "open"]}])
        table = load_labels(tmp_path / "l.jsonl", catalog)
        assert table.bits["s1"] == frozenset({catalog.index("grasp"), catalog.index("open")})

    def test_alias_resolution_on_load(self, tmp_path, catalog):
        write_labels_file(tmp_path / "l.jsonl", [{"id": "s1", "labels": ["openable"]}])
        table = load_labels(tmp_path / "l.jsonl", catalog)
        assert table.labels_for("s1") == ("open",)
        strict = AffordanceCatalog(labels=CANONICAL_LABELS)
        with pytest.raises(UnknownLabelError, match="unknown label"):
            load_labels(tmp_path / "l.jsonl", strict)

    def test_identity_bit_pattern(self, tmp_path, catalog):
        rows = [{"id": f"s{i}", "labels": [name]} for i, name in enumerate(catalog.labels)]
        write_labels_file(tmp_path / "l.jsonl", rows)
        table = load_labels(tmp_path / "l.jsonl", catalog)
        assert np.array_equal(table.matrix(), np.eye(15, dtype=bool))

    def test_empty_label_set_rejected(self, tmp_path, catalog):
        write_labels_file(tmp_path / "l.jsonl", [{"id": "s1", "labels": []}])
        with pytest.raises(ValidationError, match="empty label set"):
            load_labels(tmp_path / "l.jsonl", catalog)

    def test_duplicate_id_rejected(self, tmp_path, catalog):
        write_labels_file(
            tmp_path / "l.jsonl",
            [{"id": "s1", "labels": ["cut"]}, {"id": "s1", "labels": ["dry"]}],
        )
        with pytest.raises(ValidationError, match="duplicate"):
            load_labels(tmp_path / "l.jsonl", catalog)

    def test_label_round_trip(self, tmp_path, catalog):
        rows = [
            {"id": "a", "labels": ["grasp", "roll"]},
            {"id": "b", "labels": ["staple"]},
        ]
        write_labels_file(tmp_path / "l.jsonl", rows)
        table = load_labels(tmp_path / "l.jsonl", catalog)
        save_labels(table, tmp_path / "l2.jsonl")
        again = load_labels(tmp_path / "l2.jsonl", catalog)
        assert again.bits == table.bits
        assert again.scene_ids == table.scene_ids


def make_dataset(catalog, n, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((dim, n))
    ids = tuple(f"s{i}" for i in range(n))
    width = len(catalog)
    bits = {}
    for sid in ids:
        k = int(rng.integers(1, 4))
        bits[sid] = frozenset(rng.choice(width, size=k, replace=False).tolist())
    return (
        FeatureMatrix(data=data, scene_ids=ids),
        LabelTable(catalog=catalog, scene_ids=ids, bits=bits),
    )


class TestSplit:
    def test_paper_scale_counts(self, catalog):
        # 23,605 scenes split 18,000 / 5,605
        n = 23605
        ids = tuple(f"s{i}" for i in range(n))
        features = FeatureMatrix(data=np.ones((2, n)), scene_ids=ids)
        bits = {sid: frozenset([0]) for sid in ids}
        labels = LabelTable(catalog=catalog, scene_ids=ids, bits=bits)
        (lf, _), (vf, _) = split_dataset(
            features, labels, SplitSpec(n_learning=18000, seed=7)
        )
        assert lf.n_scenes == 18000
        assert vf.n_scenes == 5605

    def test_sequential_last_column(self, catalog):
        features, labels = make_dataset(catalog, 10)
        (lf, _), (vf, _) = split_dataset(
            features, labels, SplitSpec(n_learning=9, strategy="sequential")
        )
        assert vf.scene_ids == ("s9",)
        assert np.array_equal(vf.data[:, 0], features.data[:, 9])

    def test_shuffled_deterministic(self, catalog):
        features, labels = make_dataset(catalog, 50)
        spec = SplitSpec(n_learning=30, seed=123)
        first = split_dataset(features, labels, spec)
        second = split_dataset(features, labels, spec)
        assert first[0][0].scene_ids == second[0][0].scene_ids
        assert np.array_equal(first[1][0].data, second[1][0].data)

    def test_partition_property(self, catalog):
        features, labels = make_dataset(catalog, 37, seed=5)
        (lf, ll), (vf, vl) = split_dataset(
            features, labels, SplitSpec(n_learning=20, seed=9)
        )
        learn_ids = set(lf.scene_ids)
        valid_ids = set(vf.scene_ids)
        assert learn_ids.isdisjoint(valid_ids)
        assert learn_ids | valid_ids == set(features.scene_ids)
        assert set(ll.scene_ids) == learn_ids and set(vl.scene_ids) == valid_ids

    def test_out_of_range(self, catalog):
        features, labels = make_dataset(catalog, 10)
        for bad in (0, 10, 11):
            with pytest.raises(ValidationError):
                split_dataset(features, labels, SplitSpec(n_learning=bad))


class TestGrouping:
    def test_small_example(self):
        catalog = AffordanceCatalog(labels=("grasp", "roll"))
        data = np.eye(3)
        ids = ("a", "b", "c")
        bits = {
            "a": frozenset([0]),
            "b": frozenset([0, 1]),
            "c": frozenset([1]),
        }
        labels = LabelTable(catalog=catalog, scene_ids=ids, bits=bits)
        groups = group_by_affordance(
            FeatureMatrix(data=data, scene_ids=ids), labels, catalog
        )
        assert groups.groups["grasp"].scene_ids == ("a", "b")
        assert groups.groups["roll"].scene_ids == ("b", "c")

    def test_full_label_vector_joins_every_group(self, catalog):
        data = np.ones((4, 1))
        labels = LabelTable(
            catalog=catalog,
            scene_ids=("s0",),
            bits={"s0": frozenset(range(15))},
        )
        groups = group_by_affordance(
            FeatureMatrix(data=data, scene_ids=("s0",)), labels, catalog
        )
        assert all(g.n_scenes == 1 for g in groups.groups.values())

    def test_sizes_match_tally_oracle(self, catalog):
        features, labels = make_dataset(catalog, 200, seed=13)
        groups = group_by_affordance(features, labels, catalog)
        # independent tally: count label occurrences scene by scene
        tally = {name: 0 for name in catalog.labels}
        for sid in labels.scene_ids:
            for b in labels.bits[sid]:
                tally[catalog.labels[b]] += 1
        assert groups.sizes() == tally

    def test_multi_membership_conservation(self, catalog):
        features, labels = make_dataset(catalog, 120, seed=17)
        groups = group_by_affordance(features, labels, catalog)
        total_memberships = sum(groups.sizes().values())
        total_bits = sum(len(labels.bits[sid]) for sid in labels.scene_ids)
        assert total_memberships == total_bits

    def test_group_columns_keep_learning_order(self, catalog):
        features, labels = make_dataset(catalog, 60, seed=19)
        groups = group_by_affordance(features, labels, catalog)
        order = {sid: i for i, sid in enumerate(features.scene_ids)}
        for g in groups.groups.values():
            positions = [order[sid] for sid in g.scene_ids]
            assert positions == sorted(positions)
