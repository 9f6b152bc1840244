"""MCM: neighbor search, skinny SVD, curvature angles, fitting, labeling."""

import math

import numpy as np
import pytest

from afflabel import (
    AffordanceCatalog,
    FeatureMatrix,
    LabelTable,
    NumericalError,
    SplitSpec,
    SynthSpec,
    ValidationError,
    curvature_angle,
    fit_mcm,
    fit_mcm_threshold,
    gen_union_of_subspaces,
    group_by_affordance,
    label_mcm,
    load_mcm_model,
    nearest_neighbors,
    oracle_angle,
    save_feature_matrix,
    save_labels,
    save_mcm_model,
    skinny_svd,
    split_dataset,
)
from afflabel.curvature import HALF_PI
from afflabel.roc import threshold_grid


class TestNearestNeighbors:
    def test_hand_distances(self):
        cluster = np.array([[0.0, 1.0, 3.0]])
        pair = nearest_neighbors(cluster, np.array([0.9]), n=2)
        assert np.array_equal(pair.neighbors, np.array([[1.0, 0.0]]))
        assert pair.indices.tolist() == [1, 0]
        assert np.array_equal(pair.augmented[:, 0], [0.9])

    def test_query_equal_to_member(self):
        rng = np.random.default_rng(0)
        cluster = rng.standard_normal((5, 8))
        pair = nearest_neighbors(cluster, cluster[:, 3], n=1)
        assert pair.indices.tolist() == [3]
        assert np.array_equal(pair.neighbors[:, 0], cluster[:, 3])

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(1)
        cluster = rng.standard_normal((10, 500))
        for _ in range(20):
            j = rng.standard_normal(10)
            pair = nearest_neighbors(cluster, j, n=16)
            dists = np.array(
                [np.sqrt(np.sum((cluster[:, k] - j) ** 2)) for k in range(500)]
            )
            expected = np.argsort(dists, kind="stable")[:16]
            assert pair.indices.tolist() == expected.tolist()

    def test_tie_breaks_by_column_index(self):
        col = np.array([1.0, 0.0])
        cluster = np.stack([col, col, col, [0.0, 5.0]], axis=1)
        pair = nearest_neighbors(cluster, np.array([0.0, 0.0]), n=3)
        assert pair.indices.tolist() == [0, 1, 2]

    def test_cluster_too_small(self):
        with pytest.raises(ValidationError, match="fewer than"):
            nearest_neighbors(np.ones((3, 2)), np.ones(3), n=5)


class TestSkinnySvd:
    def test_identity(self):
        res = skinny_svd(np.eye(3))
        assert res.rank == 3
        assert np.allclose(res.sigma, 1.0)
        assert np.allclose(res.u @ np.diag(res.sigma) @ res.vt, np.eye(3))

    def test_rank_one_outer(self):
        rng = np.random.default_rng(2)
        u = rng.standard_normal(12)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(5)
        v /= np.linalg.norm(v)
        res = skinny_svd(np.outer(u, v))
        assert res.rank == 1
        assert abs(res.sigma[0] - 1.0) < 1e-12

    def test_reconstruction_and_gram_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((32, 8))
        res = skinny_svd(a)
        rebuilt = res.u @ np.diag(res.sigma) @ res.vt
        rel = np.linalg.norm(rebuilt - a) / np.linalg.norm(a)
        assert rel < 1e-8
        assert np.max(np.abs(res.u.T @ res.u - np.eye(res.rank))) < 1e-10
        # eigen-oracle on the 8x8 Gram matrix
        eigs = np.linalg.eigvalsh(a.T @ a)[::-1]
        assert np.max(np.abs(np.sqrt(np.clip(eigs, 0, None)) - res.sigma)) < 1e-8

    def test_truncates_duplicated_columns(self):
        rng = np.random.default_rng(4)
        base = rng.standard_normal((16, 3))
        a = np.concatenate([base, base[:, :2]], axis=1)  # 5 columns, rank 3
        res = skinny_svd(a)
        assert res.rank == 3
        rebuilt = res.u @ np.diag(res.sigma) @ res.vt
        assert np.linalg.norm(rebuilt - a) / np.linalg.norm(a) < 1e-8

    def test_sigma_strictly_above_tolerance(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((10, 4))
        res = skinny_svd(a, tau_rank=1e-10)
        assert np.all(res.sigma > 1e-10 * res.sigma[0])


class TestCurvatureAngle:
    def test_identical_inputs_zero(self):
        rng = np.random.default_rng(6)
        mt = rng.standard_normal((48, 12))
        res = curvature_angle(mt, mt)
        assert res.weighted_angle < 1e-12

    def test_identical_inputs_via_duplicate_member(self):
        # query equal to a member of an orthonormal cluster: the duplicated
        # column rescales one singular value identically in numerator and
        # denominator, so theta_w stays numerically zero. (For generic,
        # non-orthonormal neighborhoods the duplication shifts the spectrum
        # pairing and theta_w is small but nonzero.)
        cluster = np.eye(8)
        pair = nearest_neighbors(cluster, cluster[:, 0], n=4)
        res = curvature_angle(pair)
        assert res.weighted_angle < 1e-6

    def test_orthogonal_supports_half_pi(self):
        rng = np.random.default_rng(8)
        a = np.zeros((12, 4))
        a[:6] = rng.standard_normal((6, 4))
        b = np.zeros((12, 5))
        b[6:] = rng.standard_normal((6, 5))
        res = curvature_angle(a, b)
        assert abs(res.weighted_angle - HALF_PI) < 1e-12

    def test_out_of_span_query_raises_angle(self):
        # orthonormal neighbors spanning e1,e2; a norm-2 query along e3
        # (out of span) versus the same-norm query along e1 (in span). The
        # query norm must exceed the neighbor singular values for the
        # weighted statistic to see the new direction at all.
        neighbors = np.eye(4)[:, :2]
        out_pair = np.concatenate([2.0 * np.eye(4)[:, 2:3], neighbors], axis=1)
        in_pair = np.concatenate([2.0 * np.eye(4)[:, 0:1], neighbors], axis=1)
        theta_out = curvature_angle(out_pair, neighbors).weighted_angle
        theta_in = curvature_angle(in_pair, neighbors).weighted_angle
        assert theta_out > theta_in
        assert theta_out == pytest.approx(math.acos(2.0 / 3.0), abs=1e-12)
        assert theta_out == pytest.approx(oracle_angle(out_pair, neighbors), abs=1e-12)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            mt = rng.standard_normal((48, 12))
            j = rng.standard_normal(48)
            m = np.concatenate([j[:, None], mt], axis=1)
            res = curvature_angle(m, mt)
            assert abs(res.weighted_angle - oracle_angle(m, mt)) < 1e-8

    def test_truncated_matches_dense_on_rank_deficient_input(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            base = rng.standard_normal((20, 4))
            mt = np.concatenate([base, base[:, 1:3]], axis=1)  # rank 4 of 6 cols
            j = rng.standard_normal(20)
            m = np.concatenate([j[:, None], mt], axis=1)
            assert abs(curvature_angle(m, mt).weighted_angle - oracle_angle(m, mt)) < 1e-8

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(11)
        mt = rng.standard_normal((20, 6))
        j = rng.standard_normal(20)
        m = np.concatenate([j[:, None], mt], axis=1)
        base = curvature_angle(m, mt).weighted_angle
        for _ in range(10):
            q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
            rotated = curvature_angle(q @ m, q @ mt).weighted_angle
            assert abs(rotated - base) < 1e-8

    def test_angle_range(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            mt = rng.standard_normal((10, 5))
            m = rng.standard_normal((10, 6))
            res = curvature_angle(m, mt)
            assert 0.0 <= res.weighted_angle <= HALF_PI

    def test_raw_diagnostic_clamps_for_agreeing_subspaces(self):
        # the unweighted diagonal sum exceeds 1 for multiple agreeing
        # directions, so the raw angle is only valid as a clamped diagnostic
        rng = np.random.default_rng(13)
        mt = rng.standard_normal((30, 8))
        res = curvature_angle(mt, mt)
        assert res.raw_clamped
        assert res.raw_angle == 0.0

    def test_degenerate_zero_matrix(self):
        with pytest.raises(NumericalError, match="degenerate"):
            curvature_angle(np.zeros((4, 3)), np.ones((4, 3)))

    def test_numerator_denominator_exposed(self):
        rng = np.random.default_rng(14)
        mt = rng.standard_normal((16, 6))
        m = np.concatenate([rng.standard_normal((16, 1)), mt], axis=1)
        res = curvature_angle(m, mt)
        assert res.numerator > 0 and res.denominator > 0
        assert res.weighted_angle == pytest.approx(
            math.acos(min(1.0, res.numerator / res.denominator)), abs=1e-15
        )


def two_cluster_setup(seed=0, n_points=120, dim=32):
    """Two well-separated subspace clusters for fit/label tests."""
    spec = SynthSpec(
        dim=dim, groups=2, d_true=3, points_per_group=n_points, noise_sigma=0.01, seed=seed
    )
    features, labels, gt = gen_union_of_subspaces(spec)
    return features, labels, gt


class TestFitMcm:
    def test_separable_fit_reaches_zero_ts(self):
        features, labels, _ = two_cluster_setup(seed=15)
        clusters = group_by_affordance(features, labels, labels.catalog)
        table, clamps = fit_mcm_threshold(
            clusters, features, labels, n=8, grid_step=0.01
        )
        for name in labels.catalog.labels:
            entry = table[name]
            assert entry.enabled
            assert entry.ts == 0.0
            assert entry.tpr == 1.0 and entry.fpr == 0.0
            assert entry.threshold in table[name].curve.thresholds

    def test_identical_angle_populations_degenerate(self):
        # all angles identical across both populations: TPR equals FPR at
        # every threshold and the sweep warns
        grid = threshold_grid(0.05, upper=HALF_PI)
        angles = [0.3, 0.3, 0.3]
        from afflabel.roc import sweep_thresholds

        with pytest.warns(UserWarning, match="identical"):
            th, tpr, fpr, ts, curve = sweep_thresholds(angles, angles, grid, "le")
        assert np.array_equal(curve.tpr, curve.fpr)

    def test_cluster_too_small_disabled(self):
        features, labels, _ = two_cluster_setup(seed=16, n_points=10)
        clusters = group_by_affordance(features, labels, labels.catalog)
        table, _ = fit_mcm_threshold(clusters, features, labels, n=16)
        assert not table["group0"].enabled
        assert "needs at least 17" in table["group0"].reason

    def test_threshold_matches_fine_sweep_when_separable(self):
        # With separable angle populations the zero-ts region is an
        # interval, so the coarse and 10x-finer optima provably sit within
        # one coarse step of each other. (Interleaved populations give a
        # notched ts landscape where no such bound exists.)
        features, labels, _ = two_cluster_setup(seed=15)
        model = fit_mcm(features, labels, n=8, grid_step=0.01)
        clusters = group_by_affordance(features, labels, labels.catalog)
        truth = labels.matrix(order=features.scene_ids)
        from afflabel.curvature import _cluster_angles

        for pos, name in enumerate(labels.catalog.labels):
            assert model.thresholds[name].ts == 0.0
            angles, _ = _cluster_angles(
                clusters.groups[name], features, set(clusters.groups[name].scene_ids), 8, 1e-10
            )
            labeled, unlabeled = angles[truth[:, pos]], angles[~truth[:, pos]]
            best_ts, best_t = np.inf, None
            for t in threshold_grid(0.001, upper=HALF_PI):
                tpr = np.sum(labeled <= t) / labeled.size
                fpr = np.sum(unlabeled <= t) / unlabeled.size
                ts = math.sqrt((1 - tpr) ** 2 + fpr**2)
                if ts <= best_ts:
                    best_ts, best_t = ts, t
            assert abs(model.thresholds[name].threshold - best_t) <= 0.01 + 1e-12

    def test_leave_one_out_removes_self(self):
        # without leave-one-out every member would sit at distance 0 from
        # itself and angles would collapse to ~0 regardless of geometry;
        # check the member scores do not use the member's own column.
        features, labels, _ = two_cluster_setup(seed=18, n_points=30)
        clusters = group_by_affordance(features, labels, labels.catalog)
        cluster = clusters.groups["group0"]
        member = cluster.scene_ids[0]
        from afflabel.curvature import _cluster_angles

        angles, _ = _cluster_angles(
            cluster, features, set(cluster.scene_ids), 5, 1e-10
        )
        pos = features.scene_ids.index(member)
        keep = [i for i, sid in enumerate(cluster.scene_ids) if sid != member]
        pair = nearest_neighbors(cluster.data[:, keep], features.data[:, pos], 5)
        expected = curvature_angle(pair).weighted_angle
        assert angles[pos] == expected


class TestLabelMcm:
    def test_duplicate_member_query_gets_label(self):
        features, labels, _ = two_cluster_setup(seed=19)
        model = fit_mcm(features, labels, n=8)
        member = features.data[:, 0]
        validation = FeatureMatrix(data=member[:, None], scene_ids=("probe",))
        out = label_mcm(model, validation)
        member_labels = labels.labels_for(features.scene_ids[0])
        assert set(member_labels) <= set(out.labels_for("probe"))

    def test_orthogonal_query_gets_nothing(self):
        # clusters confined to the first 6 coordinates; query on the last
        catalog = AffordanceCatalog(labels=("a",))
        rng = np.random.default_rng(20)
        data = np.zeros((12, 40))
        data[:6] = rng.standard_normal((6, 40))
        ids = tuple(f"s{i}" for i in range(40))
        features = FeatureMatrix(data=data, scene_ids=ids)
        labels = LabelTable(
            catalog=catalog, scene_ids=ids, bits={sid: frozenset([0]) for sid in ids}
        )
        clusters = group_by_affordance(features, labels, catalog)
        from afflabel.curvature import CurvatureModel
        from afflabel.roc import ThresholdEntry, ThresholdTable

        model = CurvatureModel(
            catalog=catalog,
            clusters=clusters,
            n=6,
            tau_rank=1e-10,
            grid_step=0.001,
            thresholds=ThresholdTable(
                catalog=catalog,
                entries={
                    "a": ThresholdEntry(
                        "a", enabled=True, threshold=0.05, tpr=1, fpr=0, ts=0
                    )
                },
            ),
        )
        probe = np.zeros((12, 1))
        probe[11, 0] = 1.0
        out = label_mcm(model, FeatureMatrix(data=probe, scene_ids=("q",)))
        assert out.labels_for("q") == ()

    def test_intersection_points_get_both_labels(self):
        spec = SynthSpec(
            dim=48,
            groups=2,
            d_true=4,
            points_per_group=150,
            overlap_pairs=((0, 1),),
            overlap_fraction=0.2,
            intersection_dim=2,
            noise_sigma=0.005,
            seed=21,
        )
        features, labels, gt = gen_union_of_subspaces(spec)
        model = fit_mcm(features, labels, n=10)
        # fresh probes on the intersection subspace
        rng = np.random.default_rng(22)
        probes = gt.intersections[(0, 1)] @ rng.standard_normal((2, 20))
        validation = FeatureMatrix(
            data=probes, scene_ids=tuple(f"p{i}" for i in range(20))
        )
        out = label_mcm(model, validation)
        both = sum(
            set(out.labels_for(sid)) == {"group0", "group1"}
            for sid in validation.scene_ids
        )
        assert both >= 18  # >= 90% of intersection probes carry both labels

    def test_monotone_in_threshold(self):
        features, labels, _ = two_cluster_setup(seed=23)
        (lf, ll), (vf, _) = split_dataset(features, labels, SplitSpec(180, seed=24))
        model = fit_mcm(lf, ll, n=8)
        base = label_mcm(model, vf).matrix
        for name in model.catalog.labels:
            entry = model.thresholds[name]
            if entry.enabled:
                entry.threshold = min(HALF_PI, entry.threshold + 0.3)
        wider = label_mcm(model, vf).matrix
        assert np.all(wider | ~base)

    def test_parallel_equals_sequential(self):
        features, labels, _ = two_cluster_setup(seed=25)
        (lf, ll), (vf, _) = split_dataset(features, labels, SplitSpec(180, seed=26))
        model = fit_mcm(lf, ll, n=8)
        seq = label_mcm(model, vf, workers=1)
        par = label_mcm(model, vf, workers=8)
        assert np.array_equal(seq.matrix, par.matrix)


class TestMcmModelRoundTrip:
    def test_save_load_reconstructs_clusters(self, tmp_path):
        features, labels, _ = two_cluster_setup(seed=27)
        (lf, ll), (vf, _) = split_dataset(features, labels, SplitSpec(180, seed=28))
        fpath, lpath = tmp_path / "learn.npy", tmp_path / "learn.jsonl"
        save_feature_matrix(lf, fpath)
        save_labels(ll, lpath)
        model = fit_mcm(
            lf,
            ll,
            n=8,
            learning_features_path="learn.npy",
            learning_labels_path="learn.jsonl",
        )
        save_mcm_model(model, tmp_path / "model.json")
        back = load_mcm_model(tmp_path / "model.json")
        assert back.n == model.n
        for name in model.catalog.labels:
            assert back.thresholds[name].threshold == model.thresholds[name].threshold
        # clusters reconstructed from files, not serialized: float32 interchange
        assert back.clusters.sizes() == model.clusters.sizes()
        a = label_mcm(model, vf).matrix
        b = label_mcm(back, vf).matrix
        assert (a == b).mean() > 0.99  # float32 round trip can flip borderline cells

    def test_save_without_refs_rejected(self):
        features, labels, _ = two_cluster_setup(seed=29)
        model = fit_mcm(features, labels, n=8)
        with pytest.raises(ValidationError, match="learning-file references"):
            save_mcm_model(model, "/tmp/nope.json")
