"""Multigraph snapshots from flow records and the chronological 4-way split.

Devices become nodes, every flow becomes its own edge (parallel edges are
kept), and each snapshot carries the dense feature matrices used by the
model: node features (N x 17) and edge features (M x 98), plus the
``edge_index`` coordinate pair listing (source, target) node indices per
flow, where the source is the endpoint that sent the first packet.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .featurize import (
    EDGE_FEATURE_DIM,
    NODE_FEATURE_DIM,
    NODE_FEATURE_NAMES,
    PortVocabulary,
    edge_feature_names,
    edge_features,
    node_features,
)
from .ingest import FlowRecord, ip_bytes, ip_text

SNAPSHOT_FORMAT_VERSION = 1
PARTITION_NAMES = ("train", "testA", "testB", "testC")


class EmptyInput(DataError):
    """No flows were provided."""


class FewerThanFourFlows(DataError):
    """The chronological split needs at least one flow per partition."""


@dataclass
class GraphSnapshot:
    """One multigraph over a time window, with dense feature matrices."""

    node_ids: tuple[bytes, ...]
    edge_index: np.ndarray  # (2, M) int64; row 0 = source, row 1 = target
    node_feat: np.ndarray  # (N, 17)
    edge_feat: np.ndarray  # (M, 98)
    edge_times: np.ndarray  # (M,)
    window: tuple[float, float]
    edge_labels: Optional[tuple[str, ...]] = None
    node_labels: Optional[tuple[str, ...]] = None

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return self.edge_index.shape[1]


def _majority_label(labels: list[str], benign_label: str) -> str:
    counts = Counter(labels)
    top = max(counts.values())
    tied = sorted(name for name, c in counts.items() if c == top)
    if benign_label in tied:
        return benign_label
    return tied[0]


def build_snapshot(
    flows: Sequence[FlowRecord],
    vocab: Optional[PortVocabulary] = None,
    benign_label: str = "benign",
) -> GraphSnapshot:
    """Assemble nodes, edges and feature matrices from terminated flows.

    Nodes appear in first-seen order (initiator before responder); edge k
    points from the initiator of flow k to its responder. Self-flows
    (same device on both ends) yield self-loop edges.
    """
    if not flows:
        raise EmptyInput("cannot build a snapshot from zero flows")
    vocab = vocab or PortVocabulary.default()

    index_of: dict[bytes, int] = {}
    incident: list[list[FlowRecord]] = []
    src_idx = np.empty(len(flows), dtype=np.int64)
    dst_idx = np.empty(len(flows), dtype=np.int64)
    for k, flow in enumerate(flows):
        for ip in (flow.initiator[0], flow.responder[0]):
            if ip not in index_of:
                index_of[ip] = len(incident)
                incident.append([])
        s = index_of[flow.initiator[0]]
        t = index_of[flow.responder[0]]
        src_idx[k] = s
        dst_idx[k] = t
        incident[s].append(flow)
        if t != s:
            incident[t].append(flow)

    node_ids = tuple(index_of)
    node_feat = np.stack([node_features(ip, incident[i]) for i, ip in enumerate(node_ids)])
    edge_feat = np.stack([edge_features(f, vocab) for f in flows])
    edge_times = np.asarray([f.t_start for f in flows], dtype=np.float64)
    window = (float(min(f.t_start for f in flows)), float(max(f.t_last for f in flows)))

    edge_labels = None
    node_labels = None
    if any(f.label is not None for f in flows):
        edge_labels = tuple(f.label or "" for f in flows)
        node_labels = tuple(
            _majority_label([f.label or "" for f in incident[i]], benign_label)
            for i in range(len(node_ids))
        )

    return GraphSnapshot(
        node_ids=node_ids,
        edge_index=np.stack([src_idx, dst_idx]),
        node_feat=node_feat,
        edge_feat=edge_feat,
        edge_times=edge_times,
        window=window,
        edge_labels=edge_labels,
        node_labels=node_labels,
    )


@dataclass
class TemporalSplit:
    """Chronological partition of flow indices: train then testA/B/C.

    Partitions are contiguous chunks of the time-sorted flow list, sized
    as equally as possible with remainders assigned to the earliest
    partitions, so every training flow starts no later than any test flow.
    """

    train: list[int]
    test_a: list[int]
    test_b: list[int]
    test_c: list[int]

    def as_dict(self) -> dict[str, list[int]]:
        return {
            "train": self.train,
            "testA": self.test_a,
            "testB": self.test_b,
            "testC": self.test_c,
        }


def temporal_split(flows: Sequence[FlowRecord]) -> TemporalSplit:
    """Split time-sorted flows into four contiguous, near-equal chunks."""
    n = len(flows)
    if n < 4:
        raise FewerThanFourFlows(f"need at least 4 flows, got {n}")
    starts = [f.t_start for f in flows]
    if any(b < a for a, b in zip(starts, starts[1:])):
        raise DataError("flows must be sorted by start time")
    base, rem = divmod(n, 4)
    sizes = [base + 1 if i < rem else base for i in range(4)]
    chunks = []
    at = 0
    for size in sizes:
        chunks.append(list(range(at, at + size)))
        at += size
    return TemporalSplit(*chunks)


def split_flows(flows: Sequence[FlowRecord]) -> dict[str, list[FlowRecord]]:
    split = temporal_split(flows)
    return {
        name: [flows[i] for i in idxs] for name, idxs in split.as_dict().items()
    }


# ---------------------------------------------------------------------------
# Snapshot persistence (nodes.csv / edges.csv / meta.json)
# ---------------------------------------------------------------------------


def save_snapshot(snap: GraphSnapshot, directory, vocab: Optional[PortVocabulary] = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    e_names = edge_feature_names(vocab)

    with open(directory / "nodes.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("node_id", "label") + NODE_FEATURE_NAMES)
        for i, ip in enumerate(snap.node_ids):
            label = snap.node_labels[i] if snap.node_labels else ""
            writer.writerow([ip_text(ip), label] + [repr(float(v)) for v in snap.node_feat[i]])

    with open(directory / "edges.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("src", "dst", "label", "t_start") + e_names)
        for k in range(snap.n_edges):
            label = snap.edge_labels[k] if snap.edge_labels else ""
            writer.writerow(
                [int(snap.edge_index[0, k]), int(snap.edge_index[1, k]), label, repr(float(snap.edge_times[k]))]
                + [repr(float(v)) for v in snap.edge_feat[k]]
            )

    meta = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "n_nodes": snap.n_nodes,
        "n_edges": snap.n_edges,
        "window": [snap.window[0], snap.window[1]],
    }
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_snapshot(directory) -> GraphSnapshot:
    directory = Path(directory)
    try:
        with open(directory / "meta.json") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"not a snapshot directory: {directory}") from exc

    node_ids: list[bytes] = []
    node_rows: list[list[float]] = []
    node_labels: list[str] = []
    with open(directory / "nodes.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[2:]) != NODE_FEATURE_NAMES:
            raise DataError("nodes.csv does not carry the canonical feature columns")
        for row in reader:
            node_ids.append(ip_bytes(row[0]))
            node_labels.append(row[1])
            node_rows.append([float(v) for v in row[2:]])

    src, dst, e_labels, times, e_rows = [], [], [], [], []
    with open(directory / "edges.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != 4 + EDGE_FEATURE_DIM:
            raise DataError("edges.csv does not carry 98 feature columns")
        for row in reader:
            src.append(int(row[0]))
            dst.append(int(row[1]))
            e_labels.append(row[2])
            times.append(float(row[3]))
            e_rows.append([float(v) for v in row[4:]])

    if len(node_ids) != meta["n_nodes"] or len(src) != meta["n_edges"]:
        raise DataError("meta.json does not match the CSV contents")

    has_labels = any(e_labels) or any(node_labels)
    return GraphSnapshot(
        node_ids=tuple(node_ids),
        edge_index=np.asarray([src, dst], dtype=np.int64).reshape(2, -1),
        node_feat=np.asarray(node_rows, dtype=np.float64).reshape(len(node_ids), NODE_FEATURE_DIM),
        edge_feat=np.asarray(e_rows, dtype=np.float64).reshape(len(src), EDGE_FEATURE_DIM),
        edge_times=np.asarray(times, dtype=np.float64),
        window=(float(meta["window"][0]), float(meta["window"][1])),
        edge_labels=tuple(e_labels) if has_labels else None,
        node_labels=tuple(node_labels) if has_labels else None,
    )
