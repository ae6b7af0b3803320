"""The joint embedding architecture and its loss terms.

A sum-aggregating message-passing encoder with learnable self-weight
produces device representations; an edge fusion block combines the two
endpoint representations (summed, for order invariance) with the raw flow
attributes; small projection heads map both kinds of latents to 2-D
coordinates. Training couples a task head (feature-reconstruction
decoders, or a multi-label classifier on the edge latents) with a
topology-preserving loss that pushes connected pairs together and
disconnected pairs apart under the kernel ``p = 1 / (1 + a * d**(2b))``.

All dense math runs on :mod:`flowmap.diffmath` tapes; the public
functions in this module are thin wrappers that build a fresh tape,
evaluate, and return plain arrays or floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import diffmath as dm
from .diffmath import Tape, Tensor
from .errors import ConfigError, DataError
from .featurize import Standardizer
from .graphbuild import GraphSnapshot

CHECKPOINT_FORMAT_VERSION = 1
PROB_EPS = 1e-7

VARIANT_CLASSIFIER = "cls"
VARIANT_AUTOENCODER = "ae"


class EmptyPairSet(DataError):
    """Topology loss needs at least one pair."""


class ConfigMismatch(ConfigError):
    """Model parameters and input data disagree on dimensions."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and loss hyperparameters.

    ``kernel_a`` / ``kernel_b`` stay ``None`` until fitted from the
    target neighborhood curve at training time. ``gin_layers = 0``
    selects the raw-feature baseline: node coordinates are projected
    straight from standardized node features and edge latents are fused
    from raw edge attributes only.

    ``row_norm`` standardizes each device representation after every
    encoder layer. Sum aggregation scales hub rows by their (squared)
    degree, which saturates every sigmoid/log path downstream and lets
    endpoint context drown the raw flow attributes in edge fusion;
    per-row standardization keeps all representations on one scale.
    Turn it off to get the bare textbook update rule.
    """

    variant: str = VARIANT_CLASSIFIER
    n_classes: int = 2
    gin_layers: int = 2
    hidden_dim: int = 64
    edge_latent_dim: int = 64
    low_dim: int = 2
    mlp_depth: int = 2
    node_feat_dim: int = 17
    edge_feat_dim: int = 98
    row_norm: bool = True
    kernel_a: Optional[float] = None
    kernel_b: Optional[float] = None
    lambda_task: float = 1.0
    lambda_topo: float = 1.0
    gamma_pos: float = 0.0
    gamma_neg: float = 4.0

    def __post_init__(self):
        if self.variant not in (VARIANT_CLASSIFIER, VARIANT_AUTOENCODER):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.low_dim != 2:
            raise ConfigError("projection heads target 2-D coordinates")
        for name in ("hidden_dim", "edge_latent_dim", "mlp_depth", "node_feat_dim", "edge_feat_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.gin_layers < 0:
            raise ConfigError("gin_layers must be >= 0")
        if not 0 <= self.gamma_pos <= self.gamma_neg:
            raise ConfigError("need gamma_neg >= gamma_pos >= 0")
        if self.variant == VARIANT_CLASSIFIER and self.n_classes < 2:
            raise ConfigError("classifier variant needs n_classes >= 2")

    @property
    def node_repr_dim(self) -> int:
        return self.hidden_dim if self.gin_layers > 0 else self.node_feat_dim

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n_classes": self.n_classes,
            "gin_layers": self.gin_layers,
            "hidden_dim": self.hidden_dim,
            "edge_latent_dim": self.edge_latent_dim,
            "low_dim": self.low_dim,
            "mlp_depth": self.mlp_depth,
            "node_feat_dim": self.node_feat_dim,
            "edge_feat_dim": self.edge_feat_dim,
            "row_norm": self.row_norm,
            "kernel_a": self.kernel_a,
            "kernel_b": self.kernel_b,
            "lambda_task": self.lambda_task,
            "lambda_topo": self.lambda_topo,
            "gamma_pos": self.gamma_pos,
            "gamma_neg": self.gamma_neg,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        return cls(**doc)


@dataclass(frozen=True)
class TopoPair:
    """One supervised pair for the topology loss.

    ``weight`` is the membership strength of the connection: 1 for an
    observed (positive) pair, 0 for a sampled disconnected pair;
    fractional weights express fuzzy membership and contribute both
    cross-entropy terms.
    """

    domain: str
    i: int
    j: int
    weight: float = 1.0

    def __post_init__(self):
        if self.i == self.j:
            raise DataError("a pair must join two distinct entities")
        if not 0.0 <= self.weight <= 1.0:
            raise DataError(f"pair weight {self.weight} outside [0, 1]")


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def _mlp_shapes(shapes: dict, prefix: str, d_in: int, d_hidden: int, d_out: int, depth: int) -> None:
    dims = [d_in] + [d_hidden] * (depth - 1) + [d_out]
    for i in range(depth):
        shapes[f"{prefix}.w{i}"] = (dims[i], dims[i + 1])
        shapes[f"{prefix}.b{i}"] = (dims[i + 1],)


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape map of every learnable array, in a fixed order."""
    shapes: dict[str, tuple[int, ...]] = {}
    d_in = cfg.node_feat_dim
    for layer in range(cfg.gin_layers):
        shapes[f"gin{layer}.eps"] = ()
        _mlp_shapes(shapes, f"gin{layer}.mlp", d_in, cfg.hidden_dim, cfg.hidden_dim, cfg.mlp_depth)
        d_in = cfg.hidden_dim
    node_dim = cfg.node_repr_dim
    fuse_in = cfg.edge_feat_dim + (node_dim if cfg.gin_layers > 0 else 0)
    _mlp_shapes(shapes, "edge_fuse", fuse_in, cfg.edge_latent_dim, cfg.edge_latent_dim, cfg.mlp_depth)
    _mlp_shapes(shapes, "proj_node", node_dim, node_dim, cfg.low_dim, cfg.mlp_depth)
    _mlp_shapes(shapes, "proj_edge", cfg.edge_latent_dim, cfg.edge_latent_dim, cfg.low_dim, cfg.mlp_depth)
    if cfg.variant == VARIANT_AUTOENCODER:
        _mlp_shapes(shapes, "dec_node", node_dim, node_dim, cfg.node_feat_dim, cfg.mlp_depth)
        _mlp_shapes(shapes, "dec_edge", cfg.edge_latent_dim, cfg.edge_latent_dim, cfg.edge_feat_dim, cfg.mlp_depth)
    else:
        _mlp_shapes(shapes, "classifier", cfg.edge_latent_dim, cfg.edge_latent_dim, cfg.n_classes, cfg.mlp_depth)
    return shapes


@dataclass
class ModelParams:
    """Learnable arrays plus the preprocessing state they were trained with."""

    config: ModelConfig
    arrays: dict[str, np.ndarray]
    node_scaler: Optional[Standardizer] = None
    edge_scaler: Optional[Standardizer] = None
    class_names: Optional[tuple[str, ...]] = None

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            arrays={k: v.copy() for k, v in self.arrays.items()},
            node_scaler=self.node_scaler,
            edge_scaler=self.edge_scaler,
            class_names=self.class_names,
        )


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Symmetric uniform init, bound sqrt(6 / (fan_in + fan_out)); zero biases."""
    arrays: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(cfg).items():
        if len(shape) == 2:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            arrays[name] = rng.uniform(-bound, bound, size=shape)
        else:
            arrays[name] = np.zeros(shape)
    return ModelParams(config=cfg, arrays=arrays)


# ---------------------------------------------------------------------------
# Tape-level forward pass
# ---------------------------------------------------------------------------


def _mlp_t(leaves: dict[str, Tensor], prefix: str, x: Tensor, depth: int) -> Tensor:
    for i in range(depth):
        x = dm.add(dm.matmul(x, leaves[f"{prefix}.w{i}"]), leaves[f"{prefix}.b{i}"])
        if i < depth - 1:
            x = dm.relu(x)
    return x


def wrap_leaves(tape: Tape, params: ModelParams) -> dict[str, Tensor]:
    return {name: tape.leaf(arr) for name, arr in params.arrays.items()}


def encode_nodes_t(
    leaves: dict[str, Tensor],
    x: Tensor,
    edge_index: np.ndarray,
    cfg: ModelConfig,
) -> Tensor:
    """Message-passing layers over the multigraph; identity when 0 layers.

    Each parallel edge contributes its opposite endpoint once per layer,
    so neighbor sums carry edge multiplicity.
    """
    h = x
    n = x.shape[0]
    src, dst = edge_index[0], edge_index[1]
    for layer in range(cfg.gin_layers):
        from_dst = dm.scatter_add(dm.index_select(h, dst), src, n)
        from_src = dm.scatter_add(dm.index_select(h, src), dst, n)
        neighbor_sum = dm.add(from_dst, from_src)
        self_scale = dm.add(leaves[f"gin{layer}.eps"], 1.0)
        combined = dm.add(dm.mul(h, self_scale), neighbor_sum)
        h = _mlp_t(leaves, f"gin{layer}.mlp", combined, cfg.mlp_depth)
        if cfg.row_norm:
            h = dm.row_standardize(h)
    return h


def fuse_edges_t(
    leaves: dict[str, Tensor],
    h: Tensor,
    e: Tensor,
    edge_index: np.ndarray,
    cfg: ModelConfig,
) -> Tensor:
    if cfg.gin_layers == 0:
        fused_in = e
    else:
        h_src = dm.index_select(h, edge_index[0])
        h_dst = dm.index_select(h, edge_index[1])
        fused_in = dm.concat([dm.add(h_src, h_dst), e], axis=1)
    return _mlp_t(leaves, "edge_fuse", fused_in, cfg.mlp_depth)


def project_t(leaves: dict[str, Tensor], x: Tensor, head: str, cfg: ModelConfig) -> Tensor:
    return _mlp_t(leaves, head, x, cfg.mlp_depth)


def forward_t(
    tape: Tape,
    leaves: dict[str, Tensor],
    x_std: np.ndarray,
    e_std: np.ndarray,
    edge_index: np.ndarray,
    cfg: ModelConfig,
) -> dict[str, Tensor]:
    """Full forward pass on standardized inputs; returns named tensors."""
    x = tape.leaf(x_std)
    e = tape.leaf(e_std)
    h = encode_nodes_t(leaves, x, edge_index, cfg)
    z = fuse_edges_t(leaves, h, e, edge_index, cfg)
    out = {
        "node_repr": h,
        "edge_repr": z,
        "node_coords": project_t(leaves, h, "proj_node", cfg),
        "edge_coords": project_t(leaves, z, "proj_edge", cfg),
        "node_input": x,
        "edge_input": e,
    }
    if cfg.variant == VARIANT_AUTOENCODER:
        out["node_recon"] = _mlp_t(leaves, "dec_node", h, cfg.mlp_depth)
        out["edge_recon"] = _mlp_t(leaves, "dec_edge", z, cfg.mlp_depth)
    else:
        out["class_prob"] = dm.sigmoid(_mlp_t(leaves, "classifier", z, cfg.mlp_depth))
    return out


# ---------------------------------------------------------------------------
# Kernel and losses
# ---------------------------------------------------------------------------


def kernel_p(d, a: float, b: float):
    """Adjacency probability of two points at Euclidean distance ``d``."""
    d = np.asarray(d, dtype=np.float64)
    return 1.0 / (1.0 + a * d ** (2.0 * b))


def _pair_probability_t(coords: Tensor, idx_i: np.ndarray, idx_j: np.ndarray, a: float, b: float) -> Tensor:
    ci = dm.index_select(coords, idx_i)
    cj = dm.index_select(coords, idx_j)
    diff = dm.sub(ci, cj)
    d2 = dm.sum(dm.mul(diff, diff), axis=1)
    return dm.power(dm.add(dm.mul(dm.power(d2, b), a), 1.0), -1.0)


def loss_topo_t(
    tape: Tape,
    coords: Tensor,
    idx_i: np.ndarray,
    idx_j: np.ndarray,
    weights: np.ndarray,
    a: float,
    b: float,
) -> Tensor:
    """Fuzzy cross-entropy between observed adjacency and kernel probabilities.

    Every pair contributes ``-w log p - (1 - w) log(1 - p)``; binary
    weights reduce this to the positive/negative two-sum form.
    Probabilities are clamped away from {0, 1} before the logs.
    """
    if len(idx_i) == 0:
        raise EmptyPairSet("topology loss needs at least one pair")
    p = _pair_probability_t(coords, idx_i, idx_j, a, b)
    pc = dm.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    w = tape.leaf(np.asarray(weights, dtype=np.float64))
    anti = dm.sub(1.0, w)
    pieces = dm.add(dm.mul(dm.log(pc), w), dm.mul(dm.log(dm.sub(1.0, pc)), anti))
    return dm.mul(dm.sum(pieces), -1.0)


def _pairs_to_arrays(pairs: Sequence[TopoPair]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx_i = np.asarray([p.i for p in pairs], dtype=np.int64)
    idx_j = np.asarray([p.j for p in pairs], dtype=np.int64)
    w = np.asarray([p.weight for p in pairs], dtype=np.float64)
    return idx_i, idx_j, w


def loss_topo(coords: np.ndarray, pairs: Sequence[TopoPair], a: float, b: float) -> float:
    if not pairs:
        raise EmptyPairSet("topology loss needs at least one pair")
    tape = Tape()
    c = tape.leaf(np.asarray(coords, dtype=np.float64))
    idx_i, idx_j, w = _pairs_to_arrays(pairs)
    return float(loss_topo_t(tape, c, idx_i, idx_j, w, a, b).data)


def loss_mse_t(x: Tensor, x_hat: Tensor, e: Tensor, e_hat: Tensor) -> Tensor:
    n = x.shape[0]
    m = e.shape[0]
    node_term = dm.mul(dm.squared_norm(dm.sub(x, x_hat)), 1.0 / n)
    edge_term = dm.mul(dm.squared_norm(dm.sub(e, e_hat)), 1.0 / m)
    return dm.add(node_term, edge_term)


def loss_mse(x: np.ndarray, x_hat: np.ndarray, e: np.ndarray, e_hat: np.ndarray) -> float:
    tape = Tape()
    return float(
        loss_mse_t(tape.leaf(x), tape.leaf(x_hat), tape.leaf(e), tape.leaf(e_hat)).data
    )


def loss_asym_t(tape: Tape, prob: Tensor, targets: np.ndarray, gamma_pos: float, gamma_neg: float) -> Tensor:
    """Asymmetric focal-style multi-label loss, averaged over entities.

    Positives are damped by ``(1 - p)**gamma_pos``, negatives by
    ``p**gamma_neg``, decoupling the two focusing strengths.
    """
    y = np.asarray(targets, dtype=np.float64)
    if prob.shape != y.shape:
        raise dm.ShapeMismatch(f"probabilities {prob.shape} vs targets {y.shape}")
    m = y.shape[0]
    pc = dm.clamp(prob, PROB_EPS, 1.0 - PROB_EPS)
    y_t = tape.leaf(y)
    not_y = tape.leaf(1.0 - y)
    pos = dm.mul(dm.mul(dm.power(dm.sub(1.0, pc), gamma_pos), dm.log(pc)), y_t)
    neg = dm.mul(dm.mul(dm.power(pc, gamma_neg), dm.log(dm.sub(1.0, pc))), not_y)
    return dm.mul(dm.sum(dm.add(pos, neg)), -1.0 / m)


def loss_asym(prob: np.ndarray, targets: np.ndarray, gamma_pos: float, gamma_neg: float) -> float:
    tape = Tape()
    return float(loss_asym_t(tape, tape.leaf(prob), targets, gamma_pos, gamma_neg).data)


def total_loss_t(task: Tensor, topo_node: Tensor, topo_edge: Tensor, lambda_task: float, lambda_topo: float) -> Tensor:
    return dm.add(dm.mul(task, lambda_task), dm.mul(dm.add(topo_node, topo_edge), lambda_topo))


def total_loss(task: float, topo_node: float, topo_edge: float, lambda_task: float, lambda_topo: float) -> float:
    return lambda_task * task + lambda_topo * (topo_node + topo_edge)


# ---------------------------------------------------------------------------
# Public inference wrappers
# ---------------------------------------------------------------------------


def standardized_inputs(snapshot: GraphSnapshot, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    cfg = params.config
    if snapshot.node_feat.shape[1] != cfg.node_feat_dim:
        raise ConfigMismatch(
            f"snapshot node features have width {snapshot.node_feat.shape[1]}, model expects {cfg.node_feat_dim}"
        )
    if snapshot.edge_feat.shape[1] != cfg.edge_feat_dim:
        raise ConfigMismatch(
            f"snapshot edge features have width {snapshot.edge_feat.shape[1]}, model expects {cfg.edge_feat_dim}"
        )
    x = params.node_scaler.transform(snapshot.node_feat) if params.node_scaler else snapshot.node_feat.astype(np.float64)
    e = params.edge_scaler.transform(snapshot.edge_feat) if params.edge_scaler else snapshot.edge_feat.astype(np.float64)
    return x, e


def encode_nodes(snapshot: GraphSnapshot, params: ModelParams) -> np.ndarray:
    """Device representations (N x d) for a snapshot."""
    x, _ = standardized_inputs(snapshot, params)
    tape = Tape()
    leaves = wrap_leaves(tape, params)
    return encode_nodes_t(leaves, tape.leaf(x), snapshot.edge_index, params.config).data


def fuse_edges(h: np.ndarray, edge_feat: np.ndarray, edge_index: np.ndarray, params: ModelParams) -> np.ndarray:
    """Edge latents (M x d') from node representations and raw edge features."""
    e = params.edge_scaler.transform(edge_feat) if params.edge_scaler else np.asarray(edge_feat, dtype=np.float64)
    tape = Tape()
    leaves = wrap_leaves(tape, params)
    return fuse_edges_t(leaves, tape.leaf(h), tape.leaf(e), edge_index, params.config).data


def project(latent: np.ndarray, params: ModelParams, domain: str) -> np.ndarray:
    """2-D coordinates from latents; ``domain`` picks the head."""
    if domain not in ("node", "edge"):
        raise ValueError(f"domain must be 'node' or 'edge', got {domain!r}")
    tape = Tape()
    leaves = wrap_leaves(tape, params)
    return project_t(leaves, tape.leaf(latent), f"proj_{domain}", params.config).data


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def save_checkpoint(params: ModelParams, path) -> None:
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": params.config.to_dict(),
        "standardization": {
            "node": params.node_scaler.to_dict() if params.node_scaler else None,
            "edge": params.edge_scaler.to_dict() if params.edge_scaler else None,
        },
        "class_names": list(params.class_names) if params.class_names else None,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in params.arrays.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> ModelParams:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format: {doc.get('format_version')!r}")
    cfg = ModelConfig.from_dict(doc["config"])
    expected = parameter_shapes(cfg)
    arrays: dict[str, np.ndarray] = {}
    stored = doc["params"]
    if set(stored) != set(expected):
        raise DataError("checkpoint parameter names do not match the config")
    for name, shape in expected.items():
        entry = stored[name]
        if tuple(entry["shape"]) != shape:
            raise DataError(f"parameter {name} has shape {entry['shape']}, expected {list(shape)}")
        arrays[name] = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
    std = doc.get("standardization") or {}
    node_scaler = Standardizer.from_dict(std["node"]) if std.get("node") else None
    edge_scaler = Standardizer.from_dict(std["edge"]) if std.get("edge") else None
    class_names = tuple(doc["class_names"]) if doc.get("class_names") else None
    return ModelParams(
        config=cfg,
        arrays=arrays,
        node_scaler=node_scaler,
        edge_scaler=edge_scaler,
        class_names=class_names,
    )
