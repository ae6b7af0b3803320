import numpy as np
import pytest

from flowmap.featurize import (
    EDGE_FEATURE_DIM,
    NODE_FEATURE_DIM,
    NODE_FEATURE_NAMES,
    PortVocabulary,
    Standardizer,
    VocabularyError,
    edge_feature_names,
    edge_features,
    node_features,
    port_category,
)
from flowmap.ingest import FlowTable, ip_bytes, segment_stream

from conftest import make_packet, random_stream


@pytest.fixture(scope="module")
def vocab():
    return PortVocabulary.default()


def flow_from_packets(packets):
    table = FlowTable()
    records = []
    for p in packets:
        records += table.ingest(p)
    records += table.flush_all()
    assert len(records) == 1
    return records[0]


def feature_map(flow, vocab):
    return dict(zip(edge_feature_names(vocab), edge_features(flow, vocab)))


class TestPortVocabulary:
    def test_side_sizes(self, vocab):
        assert len(vocab.src) == 27
        assert len(vocab.dst) == 28
        assert len(vocab.src) + len(vocab.dst) == 55

    def test_every_port_maps_once(self, vocab):
        for side in ("src", "dst"):
            idx = np.asarray([vocab.category_index(p, side) for p in range(0, 65536, 257)])
            assert (idx >= 0).all()

    def test_well_known_ports(self, vocab):
        assert vocab.category_name(22, "src") == "ssh"
        assert vocab.category_name(22, "dst") == "ssh"
        assert vocab.category_name(50000, "dst") == "ephemeral"
        assert vocab.category_name(8883, "dst") == "mqtts"
        assert vocab.category_name(2323, "dst") == "registered"
        assert vocab.category_name(546, "dst") == "dhcp6"
        assert vocab.category_name(546, "src") == "unknown"

    def test_port_category_indexes(self, vocab):
        idx = port_category(22, "src", vocab)
        assert vocab.src[idx].name == "ssh"

    def test_json_roundtrip(self, vocab, tmp_path):
        from flowmap.featurize import load_vocabulary, save_vocabulary

        path = tmp_path / "vocab.json"
        save_vocabulary(vocab, path)
        again = load_vocabulary(path)
        assert again.names("src") == vocab.names("src")
        assert again.names("dst") == vocab.names("dst")
        assert again.category_index(8883, "dst") == vocab.category_index(8883, "dst")

    def test_wrong_count_rejected(self, vocab):
        with pytest.raises(VocabularyError):
            PortVocabulary(vocab.src[:-1], vocab.dst)

    def test_overlapping_ranges_rejected(self, vocab):
        from flowmap.featurize import PortCategory

        cats = list(vocab.src)
        cats[0] = PortCategory("http", ((80, 80), (443, 443)))  # collides with https
        with pytest.raises(VocabularyError):
            PortVocabulary(cats, vocab.dst)


class TestEdgeFeatures:
    def test_two_packet_flow_against_direct_statistics(self, vocab):
        # 2 packets A->B, 100 B each, at t=0 and t=1; initiator is the lo endpoint
        packets = [
            make_packet(ts=0.0, src="10.0.0.1", sport=80, dst="10.0.0.2", dport=5000, length=100),
            make_packet(ts=1.0, src="10.0.0.1", sport=80, dst="10.0.0.2", dport=5000, length=100),
        ]
        f = feature_map(flow_from_packets(packets), vocab)
        assert f["duration"] == 1.0
        assert f["dur_zero"] == 0.0
        assert f["pkts"] == 2.0
        assert f["bytes"] == 200.0
        assert f["bytes_per_pkt"] == 100.0
        assert f["pps"] == 2.0
        assert f["bps"] == 200.0
        assert f["size_min"] == f["size_max"] == f["size_mean"] == 100.0
        assert f["size_var"] == 0.0
        assert f["iat_mean"] == 1.0 and f["iat_std"] == 0.0
        assert f["dir_a2b_pkts"] == 2.0 and f["dir_a2b_bytes"] == 200.0
        assert f["dir_a2b_iat_mean"] == 1.0
        for name in edge_feature_names(vocab):
            if name.startswith("dir_b2a"):
                assert f[name] == 0.0

    def test_single_packet_flow_degenerate_rates(self, vocab):
        f = feature_map(flow_from_packets([make_packet(ts=3.0, length=64)]), vocab)
        assert f["dur_zero"] == 1.0
        assert f["pps"] == 1.0 and f["bps"] == 64.0
        assert f["iat_mean"] == f["iat_std"] == f["iat_min"] == f["iat_max"] == 0.0

    def test_one_hot_blocks(self, vocab):
        packets = [make_packet(src="10.0.0.9", sport=50000, dst="10.0.0.1", dport=53, proto="tcp")]
        f = feature_map(flow_from_packets(packets), vocab)
        assert f["proto_tcp"] == 1.0
        assert f["proto_udp"] == f["proto_icmp"] == f["proto_icmpv6"] == 0.0
        assert f["dst_port_cat_dns"] == 1.0
        assert f["src_port_cat_ephemeral"] == 1.0

    def test_ports_follow_initiator_not_key_order(self, vocab):
        # initiator is the hi endpoint: src categories must be the initiator's
        packets = [make_packet(src="10.0.0.2", sport=50001, dst="10.0.0.1", dport=443)]
        f = feature_map(flow_from_packets(packets), vocab)
        assert f["src_port_cat_ephemeral"] == 1.0
        assert f["dst_port_cat_https"] == 1.0

    def test_matches_batch_oracle_on_random_flows(self, rng, vocab):
        """Streaming accumulators agree with direct whole-flow recomputation."""
        names = edge_feature_names(vocab)

        for trial in range(60):
            n = int(rng.integers(1, 12))
            hosts = ("10.1.0.1", "10.1.0.2")
            sport, dport = 4000, 80
            times = np.sort(rng.uniform(0.0, 8.0, size=n))
            sizes = rng.integers(0, 1500, size=n)
            dirs = rng.random(n) < 0.5
            packets = [
                make_packet(
                    ts=float(times[i]),
                    src=hosts[0] if dirs[i] else hosts[1],
                    sport=sport if dirs[i] else dport,
                    dst=hosts[1] if dirs[i] else hosts[0],
                    dport=dport if dirs[i] else sport,
                    length=int(sizes[i]),
                )
                for i in range(n)
            ]
            got = feature_map(flow_from_packets(packets), vocab)

            dur = times[-1] - times[0] if n > 1 else 0.0
            assert got["duration"] == pytest.approx(dur)
            assert got["pkts"] == n
            assert got["bytes"] == sizes.sum()
            assert got["size_mean"] == pytest.approx(sizes.mean())
            assert got["size_var"] == pytest.approx(sizes.var(), abs=1e-9)
            assert got["size_min"] == sizes.min() and got["size_max"] == sizes.max()
            if n > 1:
                gaps = np.diff(times)
                assert got["iat_mean"] == pytest.approx(gaps.mean())
                assert got["iat_std"] == pytest.approx(gaps.std(), abs=1e-9)
                assert got["iat_min"] == pytest.approx(gaps.min())
                assert got["iat_max"] == pytest.approx(gaps.max())
            # per-direction oracle (direction A is the lo endpoint = 10.1.0.1 here)
            lo_is_src = dirs  # packets sent by 10.1.0.1
            for block, mask in (("dir_a2b", lo_is_src), ("dir_b2a", ~lo_is_src)):
                sub_sizes = sizes[mask]
                sub_times = times[mask]
                if len(sub_sizes) == 0:
                    assert got[f"{block}_pkts"] == 0.0
                    continue
                assert got[f"{block}_pkts"] == len(sub_sizes)
                assert got[f"{block}_bytes"] == sub_sizes.sum()
                assert got[f"{block}_size_mean"] == pytest.approx(sub_sizes.mean())
                assert got[f"{block}_size_var"] == pytest.approx(sub_sizes.var(), abs=1e-9)
                if len(sub_sizes) > 1:
                    sub_gaps = np.diff(sub_times)
                    assert got[f"{block}_iat_mean"] == pytest.approx(sub_gaps.mean())
                    assert got[f"{block}_iat_std"] == pytest.approx(sub_gaps.std(), abs=1e-9)

    def test_shape_one_hot_and_finiteness_properties(self, rng, vocab):
        stream = random_stream(rng, n_packets=3000, n_hosts=6, t_span=100.0)
        flows = list(segment_stream(stream))
        names = edge_feature_names(vocab)
        proto = [i for i, n in enumerate(names) if n.startswith("proto_")]
        src = [i for i, n in enumerate(names) if n.startswith("src_port_cat_")]
        dst = [i for i, n in enumerate(names) if n.startswith("dst_port_cat_")]
        for flow in flows:
            vec = edge_features(flow, vocab)
            assert vec.shape == (EDGE_FEATURE_DIM,)
            assert np.isfinite(vec).all()
            assert vec[proto].sum() == 1.0
            assert vec[src].sum() == 1.0
            assert vec[dst].sum() == 1.0
            assert vec[names.index("size_var")] >= 0.0

    def test_direction_swap_symmetry(self, rng, vocab):
        """Relabeling which endpoint speaks when swaps the directional blocks only."""
        names = edge_feature_names(vocab)
        n = 8
        times = np.sort(rng.uniform(0, 5, n))
        sizes = rng.integers(40, 400, n)
        dirs = rng.random(n) < 0.6

        def build(flip):
            packets = []
            for i in range(n):
                fwd = dirs[i] ^ flip
                packets.append(
                    make_packet(
                        ts=float(times[i]),
                        src="10.0.0.1" if fwd else "10.0.0.2",
                        sport=1111 if fwd else 2222,
                        dst="10.0.0.2" if fwd else "10.0.0.1",
                        dport=2222 if fwd else 1111,
                        length=int(sizes[i]),
                    )
                )
            return edge_features(flow_from_packets(packets), vocab)

        plain, flipped = build(False), build(True)
        for i, name in enumerate(names):
            if name.startswith("dir_a2b_"):
                j = names.index("dir_b2a_" + name[len("dir_a2b_"):])
                assert plain[i] == pytest.approx(flipped[j])
            elif name.startswith(("src_port_cat_", "dst_port_cat_")):
                continue  # ports follow the initiator, which flips too
            elif not name.startswith("dir_b2a_"):
                assert plain[i] == pytest.approx(flipped[i])


class TestNodeFeatures:
    def test_zero_flows_gives_smoothed_identity(self):
        vec = node_features(ip_bytes("10.0.0.1"), [])
        assert vec.shape == (NODE_FEATURE_DIM,)
        assert vec[NODE_FEATURE_NAMES.index("ratio_bytes_out_in")] == 1.0
        assert vec[NODE_FEATURE_NAMES.index("ratio_flows_out_in")] == 1.0
        assert vec[: NODE_FEATURE_NAMES.index("ratio_bytes_out_in")].sum() == 0.0

    def test_single_flow_ratio(self):
        packets = [
            make_packet(ts=0.0, src="10.0.0.9", sport=5000, dst="10.0.0.1", dport=80, length=200),
            make_packet(ts=0.5, src="10.0.0.1", sport=80, dst="10.0.0.9", dport=5000, length=100),
        ]
        flow = flow_from_packets(packets)
        vec = dict(zip(NODE_FEATURE_NAMES, node_features(ip_bytes("10.0.0.9"), [flow])))
        assert vec["bytes_out"] == 200.0
        assert vec["bytes_in"] == 100.0
        assert vec["ratio_bytes_out_in"] == pytest.approx(201.0 / 101.0)
        assert vec["ratio_flows_out_in"] == pytest.approx(2.0 / 1.0)

    def test_protocol_flags(self):
        f1 = flow_from_packets([make_packet(proto="tcp")])
        f2 = flow_from_packets([make_packet(proto="udp", dport=81)])
        vec = dict(zip(NODE_FEATURE_NAMES, node_features(ip_bytes("10.0.0.2"), [f1, f2])))
        assert vec["tcp_flag"] == 1.0 and vec["udp_flag"] == 1.0 and vec["icmp_flag"] == 0.0

    def test_icmpv6_sets_icmp_flag(self):
        f = flow_from_packets([make_packet(src="2001:db8::2", dst="2001:db8::1", proto="icmpv6")])
        vec = dict(zip(NODE_FEATURE_NAMES, node_features(ip_bytes("2001:db8::2"), [f])))
        assert vec["icmp_flag"] == 1.0

    def test_totals_conserved_across_devices(self, rng):
        stream = random_stream(rng, n_packets=2000, n_hosts=6, t_span=60.0)
        flows = list(segment_stream(stream))
        devices = sorted({f.key.lo_ip for f in flows} | {f.key.hi_ip for f in flows})
        out_b = in_b = out_p = in_p = 0.0
        for ip in devices:
            incident = [f for f in flows if ip in (f.key.lo_ip, f.key.hi_ip)]
            vec = dict(zip(NODE_FEATURE_NAMES, node_features(ip, incident)))
            out_b += vec["bytes_out"]
            in_b += vec["bytes_in"]
            out_p += vec["pkts_out"]
            in_p += vec["pkts_in"]
        total_b = sum(f.bytes for f in flows)
        total_p = sum(f.pkts for f in flows)
        assert out_b == total_b and in_b == total_b
        assert out_p == total_p and in_p == total_p

    def test_finite_for_random_flows(self, rng):
        stream = random_stream(rng, n_packets=1000, n_hosts=5)
        flows = list(segment_stream(stream))
        for ip in {f.key.lo_ip for f in flows}:
            incident = [f for f in flows if ip in (f.key.lo_ip, f.key.hi_ip)]
            assert np.isfinite(node_features(ip, incident)).all()


class TestStandardizer:
    def test_transform_zero_mean_unit_std(self, rng):
        m = rng.normal(3.0, 2.5, size=(200, 7))
        sc = Standardizer.fit(m)
        z = sc.transform(m)
        assert np.allclose(z.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(z.std(axis=0), 1.0, atol=1e-12)

    def test_constant_columns_map_to_zero(self):
        m = np.ones((10, 3)) * 4.0
        z = Standardizer.fit(m).transform(m)
        assert np.all(z == 0.0)

    def test_dict_roundtrip(self, rng):
        sc = Standardizer.fit(rng.normal(size=(50, 4)))
        again = Standardizer.from_dict(sc.to_dict())
        assert np.array_equal(sc.mean, again.mean)
        assert np.array_equal(sc.std, again.std)
