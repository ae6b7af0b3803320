import math

import numpy as np
import pytest

from flowmap.metrics import (
    EvalReport,
    LengthMismatch,
    MissingPartition,
    SingleCluster,
    davies_bouldin,
    drift_report,
    f1_suite,
    silhouette,
)

TWO_CLUSTERS = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
TWO_LABELS = ["a", "a", "b", "b"]


class TestDaviesBouldin:
    def test_hand_evaluated_configuration(self):
        # spreads 0.5 each, centroid separation 10 -> (0.5 + 0.5) / 10
        assert davies_bouldin(TWO_CLUSTERS, TWO_LABELS) == pytest.approx(0.1)

    def test_scale_invariance(self, rng):
        pts = rng.normal(size=(40, 2))
        labels = ["a" if i < 20 else "b" for i in range(40)]
        a = davies_bouldin(pts, labels)
        b = davies_bouldin(pts * 2.0, labels)
        assert a == pytest.approx(b, rel=1e-12)

    def test_translation_and_rotation_invariance(self, rng):
        pts = rng.normal(size=(30, 2))
        labels = ["a", "b", "c"] * 10
        theta = 0.7
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        moved = pts @ rot.T + np.array([5.0, -3.0])
        assert davies_bouldin(pts, labels) == pytest.approx(davies_bouldin(moved, labels), rel=1e-9)

    def test_coincident_centroids_give_infinity(self):
        pts = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 1.0], [1.0, -1.0]])
        labels = ["a", "a", "b", "b"]  # both centroids at (1, 0)
        assert math.isinf(davies_bouldin(pts, labels))

    def test_single_cluster_rejected(self):
        with pytest.raises(SingleCluster):
            davies_bouldin(np.zeros((3, 2)), ["a", "a", "a"])

    def test_matches_sklearn(self, rng):
        from sklearn.metrics import davies_bouldin_score

        pts = rng.normal(size=(60, 2)) + np.repeat(np.arange(3)[:, None] * 3.0, 20, axis=0)
        labels = [str(i // 20) for i in range(60)]
        assert davies_bouldin(pts, labels) == pytest.approx(davies_bouldin_score(pts, labels), rel=1e-9)


class TestSilhouette:
    def test_two_cluster_configuration_brute_force_value(self):
        # brute force: a = 1, b = (10 + sqrt(101)) / 2 for every point
        b = (10.0 + math.sqrt(101.0)) / 2.0
        expected = (b - 1.0) / b
        assert silhouette(TWO_CLUSTERS, TWO_LABELS) == pytest.approx(expected, rel=1e-12)

    def test_identical_points_score_zero(self):
        pts = np.zeros((4, 2))
        assert silhouette(pts, ["a", "a", "b", "b"]) == 0.0

    def test_separation_improves_score_monotonically(self):
        scores = []
        for gap in (2.0, 5.0, 20.0, 100.0):
            pts = np.array([[0.0, 0.0], [0.0, 1.0], [gap, 0.0], [gap, 1.0]])
            scores.append(silhouette(pts, TWO_LABELS))
        assert all(x < y for x, y in zip(scores, scores[1:]))
        assert scores[-1] > 0.98

    def test_singleton_cluster_scores_zero(self):
        pts = np.array([[0.0, 0.0], [5.0, 5.0], [5.0, 6.0]])
        labels = ["solo", "b", "b"]
        got = silhouette(pts, labels)
        from sklearn.metrics import silhouette_samples

        ours_nonsingleton = got * 3 - 0.0  # singleton contributes 0 by convention
        ref = silhouette_samples(pts, labels)[1:].sum()
        assert ours_nonsingleton == pytest.approx(ref, rel=1e-9)

    def test_matches_sklearn(self, rng):
        from sklearn.metrics import silhouette_score

        pts = rng.normal(size=(45, 2)) + np.repeat(np.arange(3)[:, None] * 2.5, 15, axis=0)
        labels = [str(i // 15) for i in range(45)]
        assert silhouette(pts, labels) == pytest.approx(silhouette_score(pts, labels), rel=1e-9)

    def test_single_cluster_rejected(self):
        with pytest.raises(SingleCluster):
            silhouette(np.zeros((3, 2)), ["a", "a", "a"])

    def test_invariances(self, rng):
        pts = rng.normal(size=(20, 2))
        labels = ["a", "b"] * 10
        theta = -1.2
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        assert silhouette(pts, labels) == pytest.approx(silhouette(pts @ rot.T + 7.0, labels), rel=1e-9)
        assert silhouette(pts, labels) == pytest.approx(silhouette(pts * 3.0, labels), rel=1e-9)


class TestF1Suite:
    def test_perfect_prediction(self):
        y = ["benign", "dos", "recon", "benign"]
        suite = f1_suite(y, list(y))
        assert suite["binary_f1"] == 1.0
        assert suite["macro_f1"] == 1.0
        assert suite["weighted_f1"] == 1.0
        assert all(v == 1.0 for v in suite["per_class_f1"].values())

    def test_hand_confusion_matrix(self):
        suite = f1_suite(["benign", "dos"], ["dos", "dos"])
        # binary: TP=1, FP=1, FN=0 -> F1 = 2/3
        assert suite["binary_f1"] == pytest.approx(2.0 / 3.0)

    def test_all_benign_prediction_has_zero_binary_f1(self):
        suite = f1_suite(["benign", "dos", "recon"], ["benign"] * 3)
        assert suite["binary_f1"] == 0.0

    def test_macro_excludes_absent_classes(self):
        suite = f1_suite(["a", "a", "b"], ["a", "a", "b"], classes=["a", "b", "ghost"])
        assert suite["per_class_f1"]["ghost"] == 0.0
        assert suite["macro_f1"] == 1.0

    def test_weighted_uses_support(self):
        y_true = ["a"] * 3 + ["b"]
        y_pred = ["a"] * 3 + ["a"]
        suite = f1_suite(y_true, y_pred, benign_label="a")
        f1_a = suite["per_class_f1"]["a"]
        assert suite["weighted_f1"] == pytest.approx((3 * f1_a + 1 * 0.0) / 4)

    def test_label_renaming_invariance(self, rng):
        y_true = [str(v) for v in rng.integers(0, 3, 60)]
        y_pred = [str(v) for v in rng.integers(0, 3, 60)]
        ren = {"0": "x", "1": "y", "2": "z"}
        a = f1_suite(y_true, y_pred, benign_label="0")
        b = f1_suite([ren[v] for v in y_true], [ren[v] for v in y_pred], benign_label="x")
        assert a["binary_f1"] == b["binary_f1"]
        assert a["macro_f1"] == b["macro_f1"]
        assert a["weighted_f1"] == b["weighted_f1"]

    def test_matches_sklearn(self, rng):
        from sklearn.metrics import f1_score

        labels = ["benign", "dos", "recon", "web"]
        y_true = [labels[i] for i in rng.integers(0, 4, 200)]
        y_pred = [labels[i] for i in rng.integers(0, 4, 200)]
        suite = f1_suite(y_true, y_pred)
        assert suite["macro_f1"] == pytest.approx(
            f1_score(y_true, y_pred, average="macro", zero_division=0), rel=1e-12
        )
        assert suite["weighted_f1"] == pytest.approx(
            f1_score(y_true, y_pred, average="weighted", zero_division=0), rel=1e-12
        )
        bt = [t != "benign" for t in y_true]
        bp = [p != "benign" for p in y_pred]
        assert suite["binary_f1"] == pytest.approx(f1_score(bt, bp, zero_division=0), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            f1_suite(["a"], ["a", "b"])


class TestDriftReport:
    def _inputs(self, shift=0.0):
        rng = np.random.default_rng(0)
        coords, labels, scores = {}, {}, {}
        for i, part in enumerate(("testA", "testB", "testC")):
            base = rng.normal(size=(40, 2))
            base[20:] += np.array([5.0 - i * shift, 0.0])
            coords[part] = base
            labels[part] = ["dos"] * 20 + ["mirai_like"] * 20
            scores[part] = f1_suite(labels[part], labels[part])
        return coords, labels, scores

    def test_identical_embeddings_zero_displacement(self):
        coords, labels, scores = self._inputs()
        same = {p: coords["testA"] for p in coords}
        report = drift_report(same, labels, scores)
        for moves in report["centroid_displacement"].values():
            for v in moves.values():
                assert v == pytest.approx(0.0)

    def test_shrinking_distance_tracked(self):
        coords, labels, scores = self._inputs(shift=2.0)
        report = drift_report(coords, labels, scores)
        d = [report["centroid_distance"][p]["dos"]["mirai_like"] for p in ("testA", "testB", "testC")]
        assert d[0] > d[1] > d[2]

    def test_row_structure(self):
        coords, labels, scores = self._inputs()
        report = drift_report(coords, labels, scores)
        assert set(report["per_class_f1"]) == {"dos", "mirai_like"}
        for traj in report["per_class_f1"].values():
            assert set(traj) == {"testA", "testB", "testC"}

    def test_missing_partition(self):
        coords, labels, scores = self._inputs()
        del coords["testC"]
        with pytest.raises(MissingPartition):
            drift_report(coords, labels, scores)


class TestEvalReport:
    def test_json_and_csv_output(self, tmp_path):
        report = EvalReport(
            partitions={
                "testA": {
                    "edges": {"dbi_model": 1.0, "silhouette_model": 0.5},
                    "nodes": {},
                    "f1": {"binary_f1": 0.9, "macro_f1": 0.7, "weighted_f1": 0.8, "per_class_f1": {"dos": 0.9}},
                }
            },
        )
        text = report.to_json()
        assert '"dbi_model"' in text
        path = tmp_path / "report.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "section,partition,entity,metric,class,value"
        assert any("class_f1,dos" in line for line in lines)
