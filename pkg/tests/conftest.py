import numpy as np
import pytest

from flowmap.ingest import PacketEvent, ip_bytes


def make_packet(
    ts=0.0,
    src="10.0.0.2",
    sport=5000,
    dst="10.0.0.1",
    dport=80,
    proto="tcp",
    length=100,
    flags=None,
    label=None,
):
    return PacketEvent(
        ts=ts,
        src_ip=ip_bytes(src),
        src_port=sport,
        dst_ip=ip_bytes(dst),
        dst_port=dport,
        proto=proto,
        length=length,
        tcp_flags=flags,
        label=label,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stream(rng, n_packets=200, n_hosts=6, t_span=30.0, labeled=False, n_ports=0):
    """A sorted, well-formed random packet stream over a small host pool.

    ``n_ports`` restricts the port pool; a small pool makes canonical keys
    collide so flows accumulate packets and the window rule actually fires.
    0 means the full port range (mostly single-packet flows).
    """
    hosts = [f"10.0.{i // 250}.{i % 250 + 1}" for i in range(n_hosts)]
    times = np.sort(rng.uniform(0.0, t_span, size=n_packets))
    protos = ("tcp", "udp", "icmp", "icmpv6")
    labels = ("benign", "dos", "recon")

    def port():
        return int(rng.integers(0, n_ports) if n_ports else rng.integers(0, 65536))

    packets = []
    for ts in times:
        a, b = rng.choice(n_hosts, size=2, replace=False)
        packets.append(
            make_packet(
                ts=float(ts),
                src=hosts[a],
                sport=port(),
                dst=hosts[b],
                dport=port(),
                proto=protos[rng.integers(0, 4)],
                length=int(rng.integers(0, 1500)),
                flags=int(rng.integers(0, 256)) if rng.random() < 0.5 else None,
                label=labels[rng.integers(0, 3)] if labeled else None,
            )
        )
    return packets
