"""Training: kernel fitting, pair sampling, full-batch optimization, inference.

Training runs whole-snapshot gradient steps on the combined objective
(task term plus node- and edge-topology terms) with an adaptive-moment
optimizer. Connected pairs are fixed by the graph; disconnected pairs are
re-sampled each epoch from a seeded generator, which is the only
stochasticity, so runs are bit-reproducible given the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import diffmath as dm
from . import model as mdl
from .errors import ConfigError, DataError, NumericError
from .featurize import Standardizer
from .graphbuild import GraphSnapshot
from .model import ModelConfig, ModelParams, TopoPair


class DegenerateGraph(DataError):
    """The snapshot has no positive pair in the requested domain."""


class NaNLoss(NumericError):
    """Training produced a non-finite loss."""


class NonConvergence(NumericError):
    """Kernel fitting did not reach the residual tolerance."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    neg_ratio: int = 5
    seed: int = 0
    min_dist: float = 0.1
    spread: float = 1.0
    resample_pairs: bool = True

    def __post_init__(self):
        if self.neg_ratio < 1:
            raise ConfigError("neg_ratio must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0 < self.min_dist < self.spread:
            raise ConfigError("need 0 < min_dist < spread")


# ---------------------------------------------------------------------------
# Kernel parameter fitting
# ---------------------------------------------------------------------------


def membership_target(d: np.ndarray, min_dist: float, spread: float) -> np.ndarray:
    """Target neighborhood curve: flat 1 up to min_dist, then exponential decay."""
    d = np.asarray(d, dtype=np.float64)
    return np.where(d <= min_dist, 1.0, np.exp(-(d - min_dist) / spread))


def fit_kernel_curve(
    d: np.ndarray,
    target: np.ndarray,
    max_iter: int = 200,
    tol: float = 1e-9,
) -> tuple[float, float]:
    """Least-squares fit of ``1 / (1 + a d^(2b))`` to a target curve.

    Coarse grid search over (a, b) followed by Levenberg-style damped
    Gauss-Newton refinement in log-parameter space, run until the
    relative residual improvement drops below ``tol``.
    """
    d = np.asarray(d, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    positive = d > 0
    logd = np.zeros_like(d)
    logd[positive] = np.log(d[positive])

    def predict(a: float, b: float) -> np.ndarray:
        return 1.0 / (1.0 + a * d ** (2.0 * b))

    def sse(a: float, b: float) -> float:
        r = predict(a, b) - target
        return float(r @ r)

    best = None
    for a in np.geomspace(1e-2, 1e2, 41):
        for b in np.geomspace(0.1, 5.0, 41):
            s = sse(a, b)
            if best is None or s < best[0]:
                best = (s, a, b)
    _, a, b = best

    lam = 1e-3
    prev = sse(a, b)
    for _ in range(max_iter):
        db_pow = d ** (2.0 * b)
        denom = (1.0 + a * db_pow) ** 2
        # Derivatives w.r.t. (log a, log b); the d=0 row contributes zero.
        j_loga = -(a * db_pow) / denom
        j_logb = -(a * db_pow * 2.0 * b * logd) / denom
        j_logb[~positive] = 0.0
        r = predict(a, b) - target
        jac = np.stack([j_loga, j_logb], axis=1)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        improved = False
        for _ in range(30):
            try:
                step = np.linalg.solve(jtj + lam * np.eye(2), -jtr)
            except np.linalg.LinAlgError:
                lam *= 3.0
                continue
            a_new = a * np.exp(step[0])
            b_new = b * np.exp(step[1])
            s_new = sse(a_new, b_new)
            if s_new < prev:
                a, b = a_new, b_new
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 3.0
        if not improved:
            return float(a), float(b)
        if (prev - s_new) < tol * max(prev, 1e-30):
            return float(a), float(b)
        prev = s_new
    raise NonConvergence(f"kernel fit did not converge within {max_iter} iterations")


def fit_kernel_ab(
    min_dist: float,
    spread: float,
    grid_points: int = 300,
    max_iter: int = 200,
    tol: float = 1e-9,
) -> tuple[float, float]:
    """Kernel parameters matching the target curve on [0, 3 * spread]."""
    if not 0 < min_dist < spread:
        raise ConfigError("need 0 < min_dist < spread")
    d = np.linspace(0.0, 3.0 * spread, grid_points)
    return fit_kernel_curve(d, membership_target(d, min_dist, spread), max_iter=max_iter, tol=tol)


# ---------------------------------------------------------------------------
# Pair sampling
# ---------------------------------------------------------------------------


def node_positive_pairs(edge_index: np.ndarray) -> np.ndarray:
    """Distinct connected node pairs (i < j), self-loops excluded."""
    src, dst = edge_index[0], edge_index[1]
    keep = src != dst
    lo = np.minimum(src[keep], dst[keep])
    hi = np.maximum(src[keep], dst[keep])
    if lo.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


def edge_positive_pairs(edge_index: np.ndarray) -> np.ndarray:
    """Distinct edge pairs sharing at least one endpoint (i < j)."""
    src, dst = edge_index[0], edge_index[1]
    n_nodes = int(max(src.max(), dst.max())) + 1 if src.size else 0
    chunks = []
    for v in range(n_nodes):
        incident = np.flatnonzero((src == v) | (dst == v))
        k = incident.size
        if k >= 2:
            ii, jj = np.triu_indices(k, 1)
            chunks.append(np.stack([incident[ii], incident[jj]], axis=1))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    pairs = np.concatenate(chunks, axis=0)
    return np.unique(pairs, axis=0)


class PairSampler:
    """Pair supply for one domain: fixed positives, resampled negatives.

    Negatives are drawn uniformly without replacement from the
    disconnected pairs, ``neg_ratio`` per positive, capped by how many
    disconnected pairs exist.
    """

    def __init__(self, snapshot: GraphSnapshot, domain: str, neg_ratio: int, rng: np.random.Generator):
        if domain == "node":
            self.positives = node_positive_pairs(snapshot.edge_index)
            universe = snapshot.n_nodes
        elif domain == "edge":
            self.positives = edge_positive_pairs(snapshot.edge_index)
            universe = snapshot.n_edges
        else:
            raise ValueError(f"unknown pair domain {domain!r}")
        if len(self.positives) == 0:
            raise DegenerateGraph(f"no positive {domain} pair exists")
        self.domain = domain
        self.neg_ratio = neg_ratio
        self.rng = rng
        # Flatten (i < j) pairs to ids so the complement is cheap to hold.
        pos_ids = self.positives[:, 0] * universe + self.positives[:, 1]
        ii, jj = np.triu_indices(universe, 1)
        all_ids = ii.astype(np.int64) * universe + jj.astype(np.int64)
        self._universe = universe
        self._candidates = np.setdiff1d(all_ids, pos_ids, assume_unique=True)

    @property
    def n_negative_available(self) -> int:
        return len(self._candidates)

    def sample_negatives(self) -> np.ndarray:
        want = min(self.neg_ratio * len(self.positives), len(self._candidates))
        if want == len(self._candidates):
            chosen = self._candidates
        else:
            chosen = self.rng.choice(self._candidates, size=want, replace=False)
        return np.stack([chosen // self._universe, chosen % self._universe], axis=1)


def sample_pairs(
    snapshot: GraphSnapshot,
    domain: str,
    neg_ratio: int,
    rng: np.random.Generator,
) -> list[TopoPair]:
    """Positive pairs (weight 1) followed by sampled negatives (weight 0)."""
    sampler = PairSampler(snapshot, domain, neg_ratio, rng)
    negatives = sampler.sample_negatives()
    pairs = [TopoPair(domain, int(i), int(j), 1.0) for i, j in sampler.positives]
    pairs += [TopoPair(domain, int(i), int(j), 0.0) for i, j in negatives]
    return pairs


def _pair_arrays(positives: np.ndarray, negatives: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx_i = np.concatenate([positives[:, 0], negatives[:, 0]])
    idx_j = np.concatenate([positives[:, 1], negatives[:, 1]])
    w = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    return idx_i, idx_j, w


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Adaptive-moment estimation over a dict of parameter arrays (in place)."""

    def __init__(self, arrays: dict[str, np.ndarray], lr: float, beta1: float, beta2: float, eps: float):
        self.arrays = arrays
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self._v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, arr in self.arrays.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(arr)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            arr -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    task: float
    topo_node: float
    topo_edge: float
    total: float


def one_hot_labels(labels: Sequence[str], class_names: Sequence[str]) -> np.ndarray:
    index = {name: i for i, name in enumerate(class_names)}
    y = np.zeros((len(labels), len(class_names)))
    for row, lab in enumerate(labels):
        col = index.get(lab)
        if col is not None:
            y[row, col] = 1.0
    return y


def train(
    snapshot: GraphSnapshot,
    model_config: ModelConfig,
    train_config: TrainConfig,
    progress: Optional[Callable[[EpochStats], None]] = None,
) -> tuple[ModelParams, list[EpochStats]]:
    """Optimize the joint objective on one snapshot.

    Returns the trained parameters (with fitted kernel constants and the
    training-partition standardization baked in) and the per-epoch loss
    history. Deterministic for a fixed seed.
    """
    cfg = model_config
    rng = np.random.default_rng(train_config.seed)

    node_scaler = Standardizer.fit(snapshot.node_feat)
    edge_scaler = Standardizer.fit(snapshot.edge_feat)
    x_std = node_scaler.transform(snapshot.node_feat)
    e_std = edge_scaler.transform(snapshot.edge_feat)

    if cfg.kernel_a is None or cfg.kernel_b is None:
        a, b = fit_kernel_ab(train_config.min_dist, train_config.spread)
        cfg = replace(cfg, kernel_a=float(a), kernel_b=float(b))

    class_names: Optional[tuple[str, ...]] = None
    targets = None
    if cfg.variant == mdl.VARIANT_CLASSIFIER:
        if snapshot.edge_labels is None:
            raise DataError("classifier training needs labeled flows")
        class_names = tuple(sorted(set(snapshot.edge_labels)))
        if len(class_names) != cfg.n_classes:
            cfg = replace(cfg, n_classes=len(class_names))
        targets = one_hot_labels(snapshot.edge_labels, class_names)

    params = mdl.init_params(cfg, rng)
    params.node_scaler = node_scaler
    params.edge_scaler = edge_scaler
    params.class_names = class_names

    node_sampler = PairSampler(snapshot, "node", train_config.neg_ratio, rng)
    edge_sampler = PairSampler(snapshot, "edge", train_config.neg_ratio, rng)
    node_pairs = _pair_arrays(node_sampler.positives, node_sampler.sample_negatives())
    edge_pairs = _pair_arrays(edge_sampler.positives, edge_sampler.sample_negatives())

    adam = Adam(
        params.arrays,
        lr=train_config.learning_rate,
        beta1=train_config.beta1,
        beta2=train_config.beta2,
        eps=train_config.adam_eps,
    )

    history: list[EpochStats] = []
    for epoch in range(train_config.epochs):
        if train_config.resample_pairs and epoch > 0:
            node_pairs = _pair_arrays(node_sampler.positives, node_sampler.sample_negatives())
            edge_pairs = _pair_arrays(edge_sampler.positives, edge_sampler.sample_negatives())

        tape = dm.Tape()
        leaves = mdl.wrap_leaves(tape, params)
        out = mdl.forward_t(tape, leaves, x_std, e_std, snapshot.edge_index, cfg)

        topo_node = mdl.loss_topo_t(tape, out["node_coords"], *node_pairs, cfg.kernel_a, cfg.kernel_b)
        topo_edge = mdl.loss_topo_t(tape, out["edge_coords"], *edge_pairs, cfg.kernel_a, cfg.kernel_b)
        if cfg.variant == mdl.VARIANT_AUTOENCODER:
            task = mdl.loss_mse_t(out["node_input"], out["node_recon"], out["edge_input"], out["edge_recon"])
        else:
            task = mdl.loss_asym_t(tape, out["class_prob"], targets, cfg.gamma_pos, cfg.gamma_neg)
        total = mdl.total_loss_t(task, topo_node, topo_edge, cfg.lambda_task, cfg.lambda_topo)

        stats = EpochStats(
            epoch=epoch,
            task=float(task.data),
            topo_node=float(topo_node.data),
            topo_edge=float(topo_edge.data),
            total=float(total.data),
        )
        if not np.isfinite(stats.total):
            raise NaNLoss(f"non-finite loss at epoch {epoch}: {stats}")

        tape.backward(total)
        grads = {name: leaf.grad for name, leaf in leaves.items() if leaf.grad is not None}
        adam.step(grads)

        history.append(stats)
        if progress is not None:
            progress(stats)

    return params, history


# ---------------------------------------------------------------------------
# Inference on frozen parameters
# ---------------------------------------------------------------------------


@dataclass
class EmbedResult:
    """Everything the frozen model produces for one snapshot."""

    node_repr: np.ndarray
    edge_repr: np.ndarray
    node_coords: np.ndarray
    edge_coords: np.ndarray
    class_prob: Optional[np.ndarray] = None
    pred_labels: Optional[tuple[str, ...]] = None
    node_recon: Optional[np.ndarray] = None
    edge_recon: Optional[np.ndarray] = None


def embed(snapshot: GraphSnapshot, params: ModelParams) -> EmbedResult:
    """Pure inference: project a (possibly unseen) snapshot with frozen weights."""
    x_std, e_std = mdl.standardized_inputs(snapshot, params)
    tape = dm.Tape()
    leaves = mdl.wrap_leaves(tape, params)
    out = mdl.forward_t(tape, leaves, x_std, e_std, snapshot.edge_index, params.config)
    result = EmbedResult(
        node_repr=out["node_repr"].data,
        edge_repr=out["edge_repr"].data,
        node_coords=out["node_coords"].data,
        edge_coords=out["edge_coords"].data,
    )
    if params.config.variant == mdl.VARIANT_CLASSIFIER:
        prob = out["class_prob"].data
        result.class_prob = prob
        if params.class_names:
            picks = prob.argmax(axis=1)
            result.pred_labels = tuple(params.class_names[i] for i in picks)
    else:
        result.node_recon = out["node_recon"].data
        result.edge_recon = out["edge_recon"].data
    return result


def write_history_csv(history: Sequence[EpochStats], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("epoch", "l_task", "l_topo_node", "l_topo_edge", "l_total"))
        for s in history:
            writer.writerow([s.epoch, repr(s.task), repr(s.topo_node), repr(s.topo_edge), repr(s.total)])
