"""Clustering-validity indices, classification scores, and the drift report.

Validity indices treat the ground-truth class of each point as its
cluster assignment, so they measure how well the 2-D coordinates keep
classes separated. All functions are pure and deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError


class SingleCluster(DataError):
    """Validity indices need at least two labeled groups."""


class LengthMismatch(DataError):
    """Prediction and truth vectors differ in length."""


class MissingPartition(DataError):
    """Drift analysis needs all three test partitions."""


def _group_points(points: np.ndarray, labels: Sequence[str]) -> dict[str, np.ndarray]:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DataError("points must be a 2-D array")
    if len(labels) != len(points):
        raise LengthMismatch(f"{len(labels)} labels for {len(points)} points")
    groups: dict[str, np.ndarray] = {}
    order = sorted(set(labels))
    for name in order:
        mask = np.asarray([lab == name for lab in labels])
        groups[name] = points[mask]
    return groups


def davies_bouldin(points: np.ndarray, labels: Sequence[str]) -> float:
    """Mean over clusters of the worst (spread_i + spread_j) / separation.

    Lower is better. Coincident centroids make the worst-case ratio
    infinite; the index is then reported as infinity.
    """
    groups = _group_points(points, labels)
    if len(groups) < 2:
        raise SingleCluster(f"got {len(groups)} labeled group(s)")
    names = list(groups)
    centroids = np.stack([groups[n].mean(axis=0) for n in names])
    spreads = np.asarray(
        [float(np.linalg.norm(groups[n] - centroids[i], axis=1).mean()) for i, n in enumerate(names)]
    )
    k = len(names)
    worst = np.zeros(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if j == i:
                continue
            sep = float(np.linalg.norm(centroids[i] - centroids[j]))
            if sep == 0.0:
                ratios.append(math.inf)
            else:
                ratios.append((spreads[i] + spreads[j]) / sep)
        worst[i] = max(ratios)
    return float(worst.mean())


def silhouette(points: np.ndarray, labels: Sequence[str]) -> float:
    """Mean silhouette width over all points; singletons score 0.

    For each point, cohesion ``a`` is the mean distance to its own
    cluster's other members and separation ``b`` the smallest mean
    distance to another cluster; the width is (b - a) / max(a, b).
    """
    groups = _group_points(points, labels)
    if len(groups) < 2:
        raise SingleCluster(f"got {len(groups)} labeled group(s)")
    points = np.asarray(points, dtype=np.float64)
    labels = list(labels)
    n = len(points)
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    label_arr = np.asarray(labels)
    names = sorted(groups)
    masks = {name: label_arr == name for name in names}
    sizes = {name: int(masks[name].sum()) for name in names}

    scores = np.zeros(n)
    for i in range(n):
        own = labels[i]
        if sizes[own] == 1:
            scores[i] = 0.0
            continue
        a = dist[i, masks[own]].sum() / (sizes[own] - 1)
        b = min(dist[i, masks[other]].mean() for other in names if other != own)
        top = max(a, b)
        scores[i] = 0.0 if top == 0.0 else (b - a) / top
    return float(scores.mean())


# ---------------------------------------------------------------------------
# Classification scores
# ---------------------------------------------------------------------------


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def f1_suite(
    y_true: Sequence[str],
    y_pred: Sequence[str],
    classes: Optional[Sequence[str]] = None,
    benign_label: str = "benign",
) -> dict:
    """Binary, macro, weighted and per-class F1 scores.

    The binary task folds every non-benign label into one "attack"
    positive class. Classes absent from the truth vector keep a 0 entry
    in the per-class table but are excluded from the macro average.
    """
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} truths vs {len(y_pred)} predictions")
    if classes is None:
        classes = sorted(set(y_true) | set(y_pred))

    true_attack = [lab != benign_label for lab in y_true]
    pred_attack = [lab != benign_label for lab in y_pred]
    tp = sum(1 for t, p in zip(true_attack, pred_attack) if t and p)
    fp = sum(1 for t, p in zip(true_attack, pred_attack) if not t and p)
    fn = sum(1 for t, p in zip(true_attack, pred_attack) if t and not p)
    binary = _f1(tp, fp, fn)

    per_class: dict[str, float] = {}
    support: dict[str, int] = {}
    for name in classes:
        ctp = sum(1 for t, p in zip(y_true, y_pred) if t == name and p == name)
        cfp = sum(1 for t, p in zip(y_true, y_pred) if t != name and p == name)
        cfn = sum(1 for t, p in zip(y_true, y_pred) if t == name and p != name)
        per_class[name] = _f1(ctp, cfp, cfn)
        support[name] = sum(1 for t in y_true if t == name)

    present = [name for name in classes if support[name] > 0]
    macro = float(np.mean([per_class[n] for n in present])) if present else 0.0
    total = sum(support[n] for n in present)
    weighted = (
        float(sum(per_class[n] * support[n] for n in present) / total) if total else 0.0
    )
    return {
        "binary_f1": binary,
        "macro_f1": macro,
        "weighted_f1": weighted,
        "per_class_f1": per_class,
    }


# ---------------------------------------------------------------------------
# Drift analysis
# ---------------------------------------------------------------------------

DRIFT_PARTITIONS = ("testA", "testB", "testC")


def class_centroids(points: np.ndarray, labels: Sequence[str]) -> dict[str, np.ndarray]:
    return {name: pts.mean(axis=0) for name, pts in _group_points(points, labels).items()}


def drift_report(
    coords: dict[str, np.ndarray],
    labels: dict[str, Sequence[str]],
    scores: dict[str, dict],
) -> dict:
    """Temporal drift summary across the three test partitions.

    Tracks per-class F1 trajectories, how far each class centroid moves
    between consecutive partitions, and the full inter-class centroid
    distance matrix per partition.
    """
    for part in DRIFT_PARTITIONS:
        if part not in coords or part not in labels or part not in scores:
            raise MissingPartition(f"missing partition {part!r}")

    centroids = {p: class_centroids(coords[p], labels[p]) for p in DRIFT_PARTITIONS}
    all_classes = sorted(set().union(*(set(c) for c in centroids.values())))

    per_class_f1 = {
        name: {p: scores[p]["per_class_f1"].get(name, 0.0) for p in DRIFT_PARTITIONS}
        for name in all_classes
    }
    binary_f1 = {p: scores[p]["binary_f1"] for p in DRIFT_PARTITIONS}

    displacement: dict[str, dict[str, float]] = {}
    for name in all_classes:
        moves = {}
        for prev, nxt in zip(DRIFT_PARTITIONS, DRIFT_PARTITIONS[1:]):
            if name in centroids[prev] and name in centroids[nxt]:
                moves[f"{prev}_to_{nxt}"] = float(
                    np.linalg.norm(centroids[nxt][name] - centroids[prev][name])
                )
        displacement[name] = moves

    distance_matrix: dict[str, dict[str, dict[str, float]]] = {}
    for p in DRIFT_PARTITIONS:
        names = sorted(centroids[p])
        distance_matrix[p] = {
            a: {
                b: float(np.linalg.norm(centroids[p][a] - centroids[p][b]))
                for b in names
            }
            for a in names
        }

    return {
        "binary_f1": binary_f1,
        "per_class_f1": per_class_f1,
        "centroid_displacement": displacement,
        "centroid_distance": distance_matrix,
    }


# ---------------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    """Per-partition validity/classification tables plus the drift section."""

    partitions: dict = field(default_factory=dict)
    drift: Optional[dict] = None

    def to_json(self) -> str:
        return json.dumps({"partitions": self.partitions, "drift": self.drift}, sort_keys=True, indent=1)

    def csv_rows(self) -> list[tuple]:
        """Flat (section, partition, entity, metric, class, value) rows."""
        rows: list[tuple] = []
        for part in sorted(self.partitions):
            block = self.partitions[part]
            for entity in ("edges", "nodes"):
                for metric, value in sorted((block.get(entity) or {}).items()):
                    rows.append(("validity", part, entity, metric, "", value))
            scores = block.get("f1") or {}
            for metric in ("binary_f1", "macro_f1", "weighted_f1"):
                if metric in scores:
                    rows.append(("classification", part, "edges", metric, "", scores[metric]))
            for name, value in sorted((scores.get("per_class_f1") or {}).items()):
                rows.append(("classification", part, "edges", "class_f1", name, value))
        if self.drift:
            for part, value in sorted(self.drift["binary_f1"].items()):
                rows.append(("drift", part, "edges", "binary_f1", "", value))
            for name, traj in sorted(self.drift["per_class_f1"].items()):
                for part, value in sorted(traj.items()):
                    rows.append(("drift", part, "edges", "class_f1", name, value))
            for name, moves in sorted(self.drift["centroid_displacement"].items()):
                for hop, value in sorted(moves.items()):
                    rows.append(("drift", hop, "edges", "centroid_shift", name, value))
        return rows

    def write_csv(self, path) -> None:
        import csv as _csv

        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(("section", "partition", "entity", "metric", "class", "value"))
            for row in self.csv_rows():
                writer.writerow([*row[:5], repr(float(row[5]))])
