import numpy as np
import pytest

import flowmap as fm
from flowmap import graphbuild as gb
from flowmap import metrics as mx
from flowmap import model as mdl
from flowmap import training as tr
from flowmap.errors import ConfigError
from flowmap.model import kernel_p
from flowmap.training import (
    Adam,
    DegenerateGraph,
    PairSampler,
    TrainConfig,
    edge_positive_pairs,
    fit_kernel_ab,
    fit_kernel_curve,
    membership_target,
    node_positive_pairs,
    sample_pairs,
)

from test_model import toy_snapshot


@pytest.fixture(scope="module")
def small_snaps():
    cfg = fm.ScenarioConfig(
        seed=3,
        n_devices=16,
        horizon=120.0,
        flow_counts={"benign": 90, "dos": 60, "mirai_like": 50, "recon": 50},
    )
    flows = sorted(fm.segment_stream(fm.generate(cfg)), key=lambda f: f.t_start)
    return {k: gb.build_snapshot(v) for k, v in gb.split_flows(flows).items()}


class TestKernelFit:
    def test_matches_independent_least_squares_oracle(self):
        from scipy.optimize import curve_fit

        a, b = fit_kernel_ab(0.1, 1.0)
        d = np.linspace(0.0, 3.0, 300)
        target = membership_target(d, 0.1, 1.0)
        (a_ref, b_ref), _ = curve_fit(
            lambda x, aa, bb: 1.0 / (1.0 + aa * x ** (2.0 * bb)), d, target, p0=[1.0, 1.0], maxfev=20000
        )
        assert a == pytest.approx(a_ref, abs=0.05)
        assert b == pytest.approx(b_ref, abs=0.05)
        # known values for the default neighborhood curve
        assert a == pytest.approx(1.577, abs=0.05)
        assert b == pytest.approx(0.895, abs=0.05)

    def test_recovers_exact_family_member(self):
        d = np.linspace(0.0, 3.0, 300)
        a, b = fit_kernel_curve(d, kernel_p(d, 2.0, 1.0))
        assert a == pytest.approx(2.0, abs=1e-3)
        assert b == pytest.approx(1.0, abs=1e-3)

    def test_fitted_kernel_is_exact_at_zero(self):
        a, b = fit_kernel_ab(0.1, 1.0)
        assert kernel_p(0.0, a, b) == 1.0

    def test_invalid_min_dist_rejected(self):
        with pytest.raises(ConfigError):
            fit_kernel_ab(1.5, 1.0)


class TestPairSampling:
    def test_triangle_has_no_node_negatives(self, rng):
        snap = toy_snapshot([[0, 1, 2], [1, 2, 0]], np.zeros((3, 2)), np.zeros((3, 2)))
        pairs = sample_pairs(snap, "node", 5, rng)
        positives = {(p.i, p.j) for p in pairs if p.weight == 1.0}
        negatives = [p for p in pairs if p.weight == 0.0]
        assert positives == {(0, 1), (0, 2), (1, 2)}
        assert negatives == []

    def test_path_line_graph_adjacency(self, rng):
        # edges: 0 = (a-b), 1 = (b-c); they share endpoint b
        snap = toy_snapshot([[0, 1], [1, 2]], np.zeros((3, 2)), np.zeros((2, 2)))
        pos = edge_positive_pairs(snap.edge_index)
        assert pos.tolist() == [[0, 1]]

    def test_negative_ratio_honored_when_available(self, rng):
        # star: center 0 to leaves 1..6 -> 6 positives, 15 non-adjacent pairs
        edges = [[0] * 6, list(range(1, 7))]
        snap = toy_snapshot(edges, np.zeros((7, 2)), np.zeros((6, 2)))
        sampler = PairSampler(snap, "node", 2, rng)
        negs = sampler.sample_negatives()
        assert len(negs) == 12
        pos_set = {tuple(p) for p in sampler.positives}
        for i, j in negs:
            assert i < j and (i, j) not in pos_set

    def test_negative_count_capped_by_availability(self, rng):
        edges = [[0] * 6, list(range(1, 7))]
        snap = toy_snapshot(edges, np.zeros((7, 2)), np.zeros((6, 2)))
        sampler = PairSampler(snap, "node", 50, rng)
        assert len(sampler.sample_negatives()) == 15

    def test_no_self_pairs_and_no_duplicates(self, rng):
        snap = toy_snapshot([[0, 0, 1, 2], [1, 1, 2, 3]], np.zeros((4, 2)), np.zeros((4, 2)))
        pairs = sample_pairs(snap, "edge", 3, rng)
        seen = set()
        for p in pairs:
            assert p.i != p.j
            key = (p.i, p.j, p.weight)
            assert key not in seen
            seen.add(key)

    def test_degenerate_graph_raises(self, rng):
        # a single self-loop yields no node positives
        snap = toy_snapshot([[0], [0]], np.zeros((1, 2)), np.zeros((1, 2)))
        with pytest.raises(DegenerateGraph):
            sample_pairs(snap, "node", 5, rng)

    def test_parallel_edges_one_positive(self):
        snap = toy_snapshot([[0, 0], [1, 1]], np.zeros((2, 2)), np.zeros((2, 2)))
        assert node_positive_pairs(snap.edge_index).tolist() == [[0, 1]]


class TestAdam:
    def test_zero_gradient_leaves_parameters_unchanged(self):
        arrays = {"w": np.ones((2, 2))}
        before = arrays["w"].copy()
        opt = Adam(arrays, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        opt.step({"w": np.zeros((2, 2))})
        assert np.array_equal(arrays["w"], before)

    def test_first_step_magnitude_is_learning_rate(self):
        arrays = {"w": np.zeros(3)}
        opt = Adam(arrays, lr=0.05, beta1=0.9, beta2=0.999, eps=1e-8)
        opt.step({"w": np.array([1.0, -2.0, 0.5])})
        assert np.allclose(np.abs(arrays["w"]), 0.05, atol=1e-6)

    def test_descends_simple_quadratic(self):
        arrays = {"w": np.array([5.0])}
        opt = Adam(arrays, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        for _ in range(500):
            opt.step({"w": 2.0 * arrays["w"]})
        assert abs(arrays["w"][0]) < 1e-2


class TestTraining:
    def test_bitwise_deterministic_given_seed(self, small_snaps, tmp_path):
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        tcfg = TrainConfig(epochs=8, seed=11)
        p1, h1 = tr.train(small_snaps["train"], mcfg, tcfg)
        p2, h2 = tr.train(small_snaps["train"], mcfg, tcfg)
        assert h1 == h2
        for name in p1.arrays:
            assert np.array_equal(p1.arrays[name], p2.arrays[name])
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        mdl.save_checkpoint(p1, a)
        mdl.save_checkpoint(p2, b)
        assert a.read_bytes() == b.read_bytes()

    def test_autoencoder_beats_its_starting_loss(self, small_snaps):
        mcfg = mdl.ModelConfig(variant="ae", hidden_dim=16, edge_latent_dim=16)
        tcfg = TrainConfig(epochs=60, seed=1)
        params, history = tr.train(small_snaps["train"], mcfg, tcfg)
        assert history[-1].task < history[0].task
        # and below the mean-predictor loss (sum of standardized feature variances)
        x = params.node_scaler.transform(small_snaps["train"].node_feat)
        e = params.edge_scaler.transform(small_snaps["train"].edge_feat)
        baseline = x.var(axis=0).sum() + e.var(axis=0).sum()
        assert history[-1].task < baseline

    def test_classifier_fits_separable_data(self, small_snaps):
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        tcfg = TrainConfig(epochs=120, seed=2)
        params, history = tr.train(small_snaps["train"], mcfg, tcfg)
        res = tr.embed(small_snaps["train"], params)
        suite = mx.f1_suite(list(small_snaps["train"].edge_labels), list(res.pred_labels))
        assert suite["binary_f1"] >= 0.99

    def test_history_is_finite(self, small_snaps):
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        params, history = tr.train(small_snaps["train"], mcfg, TrainConfig(epochs=10, seed=0))
        for s in history:
            assert np.isfinite([s.task, s.topo_node, s.topo_edge, s.total]).all()

    def test_topology_separates_connected_from_disconnected(self, small_snaps):
        """Training widens the kernel-probability gap between connected and
        disconnected pairs and drives disconnected pairs apart.

        The gap, not the absolute positive probability, is the robust
        signal: random init starts with a compact cloud where every pair
        already scores high, and satisfying the 5x negatives forces a
        global expansion that can lower positives a little too.
        """
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        tcfg = TrainConfig(epochs=80, seed=4, resample_pairs=False)
        snap = small_snaps["train"]

        def mean_probs(params, sample_seed=77):
            res = tr.embed(snap, params)
            a, b = params.config.kernel_a, params.config.kernel_b
            rng = np.random.default_rng(sample_seed)
            out = []
            for dom, coords in (("node", res.node_coords), ("edge", res.edge_coords)):
                sampler = PairSampler(snap, dom, 5, rng)
                pos = sampler.positives
                neg = sampler.sample_negatives()
                dp = np.linalg.norm(coords[pos[:, 0]] - coords[pos[:, 1]], axis=1)
                dn = np.linalg.norm(coords[neg[:, 0]] - coords[neg[:, 1]], axis=1)
                out.append((kernel_p(dp, a, b).mean(), kernel_p(dn, a, b).mean()))
            return out

        params, _ = tr.train(snap, mcfg, tcfg)
        # untrained reference with identical init
        rng = np.random.default_rng(tcfg.seed)
        ref = mdl.init_params(params.config, rng)
        ref.node_scaler = params.node_scaler
        ref.edge_scaler = params.edge_scaler
        ref.class_names = params.class_names
        before = mean_probs(ref)
        after = mean_probs(params)
        for (pos0, neg0), (pos1, neg1) in zip(before, after):
            assert neg1 < neg0
            assert (pos1 - neg1) > (pos0 - neg0)
            assert pos1 > neg1

    def test_classifier_requires_labels(self, small_snaps):
        from dataclasses import replace

        from flowmap.errors import DataError

        snap = replace(small_snaps["train"], edge_labels=None)
        with pytest.raises(DataError):
            tr.train(snap, mdl.ModelConfig(variant="cls"), TrainConfig(epochs=1, seed=0))

    def test_history_csv(self, small_snaps, tmp_path):
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        params, history = tr.train(small_snaps["train"], mcfg, TrainConfig(epochs=3, seed=0))
        path = tmp_path / "history.csv"
        tr.write_history_csv(history, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,l_task,l_topo_node,l_topo_edge,l_total"
        assert len(lines) == 4


class TestEmbed:
    def test_embedding_training_snapshot_reproduces_coordinates(self, small_snaps):
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        params, _ = tr.train(small_snaps["train"], mcfg, TrainConfig(epochs=5, seed=0))
        r1 = tr.embed(small_snaps["train"], params)
        r2 = tr.embed(small_snaps["train"], params)
        assert np.array_equal(r1.node_coords, r2.node_coords)
        assert np.array_equal(r1.edge_coords, r2.edge_coords)

    def test_unseen_partitions_embed_without_reoptimization(self, small_snaps):
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        params, _ = tr.train(small_snaps["train"], mcfg, TrainConfig(epochs=5, seed=0))
        before = {k: v.copy() for k, v in params.arrays.items()}
        for part in ("testA", "testB", "testC"):
            res = tr.embed(small_snaps[part], params)
            snap = small_snaps[part]
            assert res.node_coords.shape == (snap.n_nodes, 2)
            assert res.edge_coords.shape == (snap.n_edges, 2)
            assert len(res.pred_labels) == snap.n_edges
        for name, arr in params.arrays.items():
            assert np.array_equal(arr, before[name])

    def test_dimension_mismatch_raises(self, small_snaps):
        mcfg = mdl.ModelConfig(variant="cls", hidden_dim=16, edge_latent_dim=16)
        params, _ = tr.train(small_snaps["train"], mcfg, TrainConfig(epochs=2, seed=0))
        bad = toy_snapshot([[0], [1]], np.zeros((2, 5)), np.zeros((1, 7)))
        with pytest.raises(mdl.ConfigMismatch):
            tr.embed(bad, params)

    def test_autoencoder_embed_returns_reconstructions(self, small_snaps):
        mcfg = mdl.ModelConfig(variant="ae", hidden_dim=16, edge_latent_dim=16)
        params, _ = tr.train(small_snaps["train"], mcfg, TrainConfig(epochs=2, seed=0))
        res = tr.embed(small_snaps["train"], params)
        assert res.node_recon.shape == small_snaps["train"].node_feat.shape
        assert res.edge_recon.shape == small_snaps["train"].edge_feat.shape
        assert res.class_prob is None
