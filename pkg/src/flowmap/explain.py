"""Monte-Carlo Shapley attribution of embedding coordinates to input features.

The explained function maps one entity's own raw features to its 2-D
coordinate while the rest of the graph stays frozen: a flow keeps its
endpoint representations fixed at their actual values, a device keeps the
neighbor messages entering each encoder layer fixed. Marginal
contributions are averaged over sampled feature coalitions drawn from
random permutations, with the present/absent masks of each draw differing
only in the feature under study (a paired estimator), and absent features
filled in from a background sample of the training data.

One-hot blocks are perturbed as atomic groups by default, so masked
inputs never contain invalid multi-hot rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError
from .featurize import NODE_FEATURE_NAMES, PortVocabulary, edge_feature_names
from .graphbuild import GraphSnapshot
from .model import ModelParams, standardized_inputs

AXIS_GLYPHS = {0: ("→", "←"), 1: ("↑", "↓")}  # (positive, negative)


class EmptyBackground(DataError):
    """Attribution needs at least one background row."""


class EmptyGroup(DataError):
    """A class group with no attribution results cannot be ranked."""


@dataclass(frozen=True)
class FeatureGroups:
    """Partition of raw feature columns into perturbation units."""

    names: tuple[str, ...]
    unit_of_feature: np.ndarray  # (F_raw,) -> unit index

    @property
    def n_units(self) -> int:
        return len(self.names)

    @classmethod
    def singletons(cls, feature_names: Sequence[str]) -> "FeatureGroups":
        return cls(tuple(feature_names), np.arange(len(feature_names)))

    @classmethod
    def edge_groups(cls, vocab: Optional[PortVocabulary] = None, grouped: bool = True) -> "FeatureGroups":
        names = edge_feature_names(vocab)
        if not grouped:
            return cls.singletons(names)
        vocab = vocab or PortVocabulary.default()
        numeric = 43
        unit_names = list(names[:numeric]) + ["proto", "src_port_cat", "dst_port_cat"]
        unit_of = np.empty(len(names), dtype=np.int64)
        unit_of[:numeric] = np.arange(numeric)
        at = numeric
        for block, width in (("proto", 4), ("src_port_cat", len(vocab.src)), ("dst_port_cat", len(vocab.dst))):
            unit_of[at : at + width] = unit_names.index(block)
            at += width
        return cls(tuple(unit_names), unit_of)

    @classmethod
    def node_groups(cls) -> "FeatureGroups":
        return cls.singletons(NODE_FEATURE_NAMES)


@dataclass
class AttributionResult:
    """Shapley estimates for one entity: (output dim x unit) matrices."""

    entity_id: str
    entity_type: str
    phi: np.ndarray  # (d_low, n_units)
    phi0: np.ndarray  # (d_low,)
    stderr: np.ndarray  # (d_low, n_units)
    n_samples: int
    feature_names: tuple[str, ...]
    label: Optional[str] = None


# ---------------------------------------------------------------------------
# Frozen-context coordinate functions
# ---------------------------------------------------------------------------


def _mlp_np(arrays: dict[str, np.ndarray], prefix: str, x: np.ndarray, depth: int) -> np.ndarray:
    for i in range(depth):
        x = x @ arrays[f"{prefix}.w{i}"] + arrays[f"{prefix}.b{i}"]
        if i < depth - 1:
            x = np.maximum(x, 0.0)
    return x


def _row_standardize_np(x: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    centered = x - x.mean(axis=1, keepdims=True)
    return centered / np.sqrt(centered.var(axis=1, keepdims=True) + eps)


class CoordinateModel:
    """Frozen trained model bound to one snapshot, for attribution.

    Precomputes the encoder's layer outputs and the per-layer neighbor
    sums so per-entity coordinate functions are cheap, batched, pure
    numpy.
    """

    def __init__(self, params: ModelParams, snapshot: GraphSnapshot):
        self.params = params
        self.cfg = params.config
        self.snapshot = snapshot
        x_std, e_std = standardized_inputs(snapshot, params)
        self._x_std = x_std
        self._e_std = e_std

        arrays = params.arrays
        src, dst = snapshot.edge_index[0], snapshot.edge_index[1]
        n = snapshot.n_nodes
        layers = [x_std]
        h = x_std
        self._neighbor_sums: list[np.ndarray] = []
        for layer in range(self.cfg.gin_layers):
            nb = np.zeros((n, h.shape[1]))
            np.add.at(nb, src, h[dst])
            np.add.at(nb, dst, h[src])
            self._neighbor_sums.append(nb)
            eps = float(arrays[f"gin{layer}.eps"])
            h = _mlp_np(arrays, f"gin{layer}.mlp", (1.0 + eps) * h + nb, self.cfg.mlp_depth)
            if self.cfg.row_norm:
                h = _row_standardize_np(h)
            layers.append(h)
        self._node_repr = h

    @property
    def node_repr(self) -> np.ndarray:
        return self._node_repr

    def edge_fn(self, edge_idx: int) -> Callable[[np.ndarray], np.ndarray]:
        """Raw flow features (batch, F_e) -> coordinates (batch, 2).

        Endpoint representations stay fixed at their actual values.
        """
        arrays = self.params.arrays
        cfg = self.cfg
        scaler = self.params.edge_scaler
        if cfg.gin_layers > 0:
            s = int(self.snapshot.edge_index[0, edge_idx])
            t = int(self.snapshot.edge_index[1, edge_idx])
            h_sum = self._node_repr[s] + self._node_repr[t]
        else:
            h_sum = None

        def fn(raw: np.ndarray) -> np.ndarray:
            raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
            e = scaler.transform(raw) if scaler else raw
            if h_sum is None:
                fused_in = e
            else:
                fused_in = np.concatenate([np.broadcast_to(h_sum, (len(e), h_sum.size)), e], axis=1)
            z = _mlp_np(arrays, "edge_fuse", fused_in, cfg.mlp_depth)
            return _mlp_np(arrays, "proj_edge", z, cfg.mlp_depth)

        return fn

    def node_fn(self, node_idx: int) -> Callable[[np.ndarray], np.ndarray]:
        """Raw device features (batch, F_v) -> coordinates (batch, 2).

        Messages from neighbors entering each layer stay fixed at their
        actual values; only the device's own representation varies.
        """
        arrays = self.params.arrays
        cfg = self.cfg
        scaler = self.params.node_scaler
        frozen = [nb[node_idx] for nb in self._neighbor_sums]

        def fn(raw: np.ndarray) -> np.ndarray:
            raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
            h = scaler.transform(raw) if scaler else raw
            for layer in range(cfg.gin_layers):
                eps = float(arrays[f"gin{layer}.eps"])
                h = _mlp_np(arrays, f"gin{layer}.mlp", (1.0 + eps) * h + frozen[layer], cfg.mlp_depth)
                if cfg.row_norm:
                    h = _row_standardize_np(h)
            return _mlp_np(arrays, "proj_node", h, cfg.mlp_depth)

        return fn


# ---------------------------------------------------------------------------
# Monte-Carlo Shapley estimation
# ---------------------------------------------------------------------------


def mc_shap(
    fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    background: np.ndarray,
    groups: FeatureGroups,
    n_samples: int,
    rng: np.random.Generator,
    entity_id: str = "",
    entity_type: str = "flow",
    label: Optional[str] = None,
) -> AttributionResult:
    """Paired Monte-Carlo Shapley estimate of ``fn`` at ``x``.

    Each of the ``n_samples`` draws per unit picks one background row and
    one random unit permutation; the unit's marginal contribution is the
    output difference between the coalition with and without it. The base
    value is the mean output over the background rows.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if background.shape[0] == 0:
        raise EmptyBackground("background set is empty")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if background.shape[1] != x.size:
        raise DataError(f"background width {background.shape[1]} != feature count {x.size}")

    n_units = groups.n_units
    unit_of = groups.unit_of_feature
    phi0 = fn(background).mean(axis=0)
    d_out = phi0.size

    phi = np.zeros((d_out, n_units))
    stderr = np.zeros((d_out, n_units))
    for j in range(n_units):
        bg_rows = background[rng.integers(0, background.shape[0], size=n_samples)]
        keys = rng.random((n_samples, n_units))
        include = keys < keys[:, [j]]  # units strictly preceding j in the permutation
        include[:, j] = False
        mask_minus = include[:, unit_of]
        mask_plus = mask_minus | (unit_of == j)

        x_plus = np.where(mask_plus, x, bg_rows)
        x_minus = np.where(mask_minus, x, bg_rows)
        diffs = fn(x_plus) - fn(x_minus)  # (n_samples, d_out)
        phi[:, j] = diffs.mean(axis=0)
        if n_samples > 1:
            stderr[:, j] = diffs.std(axis=0, ddof=1) / np.sqrt(n_samples)

    return AttributionResult(
        entity_id=entity_id,
        entity_type=entity_type,
        phi=phi,
        phi0=phi0,
        stderr=stderr,
        n_samples=n_samples,
        feature_names=groups.names,
        label=label,
    )


def additivity_check(
    result: AttributionResult,
    fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gap between summed attributions and (prediction - base value).

    Returns per-dimension ``|sum_j phi_j - (f(x) - phi0)|`` alongside the
    combined standard error of the estimator for that sum.
    """
    fx = fn(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    residual = np.abs(result.phi.sum(axis=1) - (fx - result.phi0))
    combined = np.sqrt((result.stderr**2).sum(axis=1))
    return residual, combined


def global_importance(
    results_by_class: dict[str, Sequence[AttributionResult]],
    axis: int,
    top_k: int = 4,
) -> list[dict]:
    """Per-class driver ranking for one embedding axis.

    Features are ranked by the magnitude of their mean attribution; the
    sign is rendered as a direction glyph (left/right for axis 0,
    down/up for axis 1).
    """
    if axis not in AXIS_GLYPHS:
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    pos_glyph, neg_glyph = AXIS_GLYPHS[axis]
    rows: list[dict] = []
    for cls in sorted(results_by_class):
        results = list(results_by_class[cls])
        if not results:
            raise EmptyGroup(f"class {cls!r} has no attribution results")
        names = results[0].feature_names
        stacked = np.stack([r.phi[axis] for r in results])
        means = stacked.mean(axis=0)
        order = np.argsort(-np.abs(means), kind="stable")
        for rank, fi in enumerate(order[:top_k], start=1):
            value = float(means[fi])
            rows.append(
                {
                    "class": cls,
                    "rank": rank,
                    "feature": names[fi],
                    "mean_phi": value,
                    "direction": pos_glyph if value >= 0 else neg_glyph,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def write_attributions_csv(results: Sequence[AttributionResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("entity_id", "entity_type", "axis", "feature_name", "phi", "stderr"))
        for r in results:
            for axis in range(r.phi.shape[0]):
                for fi, name in enumerate(r.feature_names):
                    writer.writerow(
                        [r.entity_id, r.entity_type, axis, name, repr(r.phi[axis, fi]), repr(r.stderr[axis, fi])]
                    )


def write_driver_table_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("class", "rank", "feature", "mean_phi", "direction"))
        for row in rows:
            writer.writerow([row["class"], row["rank"], row["feature"], repr(row["mean_phi"]), row["direction"]])
