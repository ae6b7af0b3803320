"""Feature extraction: 98-dimensional flow vectors and 17-dimensional device vectors.

Flow (edge) vectors concatenate global session counters, packet sizing,
inter-arrival timing, two 12-value directional blocks, a protocol one-hot
and service-category one-hots for the source and destination ports.
Device (node) vectors aggregate volume, rate, protocol-activity and
symmetry statistics over the flows incident to the device.

Conventions used throughout:

* zero-duration flows set the ``dur_zero`` flag and report rates as raw
  counts (``pps = pkts``, ``bps = bytes``);
* variances and standard deviations are population statistics (divide by
  n), which makes them 0 for single samples;
* symmetry ratios are smoothed as ``(x + 1) / (y + 1)`` so silent
  directions stay finite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .ingest import DirectionStats, FlowRecord

EDGE_FEATURE_DIM = 98
NODE_FEATURE_DIM = 17

EPHEMERAL_RANGE = (49152, 65535)
REGISTERED_RANGE = (1024, 49151)
CATCH_ALL_NAMES = ("ephemeral", "registered", "unknown")

# Named service categories shared by both sides, in feature order. The
# destination side additionally claims dhcp6. Three catch-alls close each
# list: ephemeral (49152-65535), registered (1024-49151 unclaimed) and
# unknown (everything else unclaimed).
_BASE_SERVICES: tuple[tuple[str, tuple[int, ...]], ...] = (
    ("http", (80,)),
    ("https", (443,)),
    ("http_alt", (8000, 8008, 8080, 8081, 8888)),
    ("dns", (53,)),
    ("ssh", (22,)),
    ("telnet", (23,)),
    ("ftp", (21,)),
    ("ftp_data", (20,)),
    ("smtp", (25,)),
    ("smtp_alt", (587,)),
    ("smtp_alt2", (465,)),
    ("snmp", (161,)),
    ("snmp_trap", (162,)),
    ("mqtt", (1883,)),
    ("mqtts", (8883,)),
    ("dhcp", (67, 68)),
    ("ntp", (123,)),
    ("irc", (6667,)),
    ("irc_alt", (6668,)),
    ("irc_alt2", (6669,)),
    ("adb", (5555,)),
    ("rdp", (3389,)),
    ("rtsp", (554,)),
    ("upnp", (1900,)),
)
_DST_EXTRA: tuple[tuple[str, tuple[int, ...]], ...] = (("dhcp6", (546, 547)),)


class VocabularyError(ConfigError):
    """Port vocabulary does not satisfy its structural invariants."""


@dataclass(frozen=True)
class PortCategory:
    """A named service category claiming a set of inclusive port ranges."""

    name: str
    ranges: tuple[tuple[int, int], ...] = ()


def _expand_singletons(ports: Iterable[int]) -> tuple[tuple[int, int], ...]:
    return tuple((p, p) for p in ports)


def _side_categories(extra_after_dhcp: Sequence[tuple[str, tuple[int, ...]]]) -> tuple[PortCategory, ...]:
    cats: list[PortCategory] = []
    for name, ports in _BASE_SERVICES:
        cats.append(PortCategory(name, _expand_singletons(ports)))
        if name == "dhcp":
            for xname, xports in extra_after_dhcp:
                cats.append(PortCategory(xname, _expand_singletons(xports)))
    cats.extend(PortCategory(name) for name in CATCH_ALL_NAMES)
    return tuple(cats)


def _build_lookup(categories: Sequence[PortCategory]) -> np.ndarray:
    """Map each port 0-65535 to exactly one category index."""
    table = np.full(65536, -1, dtype=np.int32)
    for idx, cat in enumerate(categories):
        for lo, hi in cat.ranges:
            if not (0 <= lo <= hi <= 65535):
                raise VocabularyError(f"bad port range ({lo}, {hi}) in {cat.name!r}")
            span = table[lo : hi + 1]
            if np.any(span >= 0):
                raise VocabularyError(f"overlapping port ranges at category {cat.name!r}")
            span[:] = idx
    names = [c.name for c in categories]
    for special, (lo, hi) in (
        ("ephemeral", EPHEMERAL_RANGE),
        ("registered", REGISTERED_RANGE),
        ("unknown", (0, 1023)),
    ):
        if special not in names:
            raise VocabularyError(f"missing catch-all category {special!r}")
        idx = names.index(special)
        span = table[lo : hi + 1]
        span[span < 0] = idx
    if np.any(table < 0):
        raise VocabularyError("vocabulary leaves some ports unmapped")
    return table


class PortVocabulary:
    """Ordered service categories for the source and destination side.

    The source side has 27 categories, the destination side 28 (dhcp6),
    so the two one-hot blocks contribute 55 dimensions and the flow
    vector totals 98. Overriding vocabularies must keep those counts.
    """

    SRC_SIZE = 27
    DST_SIZE = 28

    def __init__(self, src: Sequence[PortCategory], dst: Sequence[PortCategory]):
        if len(src) != self.SRC_SIZE or len(dst) != self.DST_SIZE:
            raise VocabularyError(
                f"need {self.SRC_SIZE} source and {self.DST_SIZE} destination "
                f"categories, got {len(src)} and {len(dst)}"
            )
        for cats in (src, dst):
            names = [c.name for c in cats]
            if len(set(names)) != len(names):
                raise VocabularyError("duplicate category names within a side")
        self.src = tuple(src)
        self.dst = tuple(dst)
        self._lookup = {"src": _build_lookup(self.src), "dst": _build_lookup(self.dst)}

    @classmethod
    def default(cls) -> "PortVocabulary":
        return cls(_side_categories(()), _side_categories(_DST_EXTRA))

    def category_index(self, port: int, side: str) -> int:
        if side not in ("src", "dst"):
            raise ValueError(f"side must be 'src' or 'dst', got {side!r}")
        if not 0 <= port <= 65535:
            raise ValueError(f"port {port} out of range")
        return int(self._lookup[side][port])

    def category_name(self, port: int, side: str) -> str:
        cats = self.src if side == "src" else self.dst
        return cats[self.category_index(port, side)].name

    def names(self, side: str) -> tuple[str, ...]:
        cats = self.src if side == "src" else self.dst
        return tuple(c.name for c in cats)

    def to_json(self) -> list[dict]:
        doc = []
        for side, cats in (("src", self.src), ("dst", self.dst)):
            for c in cats:
                doc.append({"name": c.name, "side": side, "ports": [list(r) for r in c.ranges]})
        return doc

    @classmethod
    def from_json(cls, doc: list[dict]) -> "PortVocabulary":
        sides: dict[str, list[PortCategory]] = {"src": [], "dst": []}
        for entry in doc:
            try:
                name = entry["name"]
                side = entry["side"]
                ports = entry.get("ports", [])
            except (KeyError, TypeError) as exc:
                raise VocabularyError(f"malformed vocabulary entry: {entry!r}") from exc
            ranges = []
            for r in ports:
                if isinstance(r, int):
                    ranges.append((r, r))
                else:
                    lo, hi = r
                    ranges.append((int(lo), int(hi)))
            cat = PortCategory(name, tuple(ranges))
            if side == "both":
                sides["src"].append(cat)
                sides["dst"].append(cat)
            elif side in sides:
                sides[side].append(cat)
            else:
                raise VocabularyError(f"unknown side {side!r}")
        for side in ("src", "dst"):
            present = {c.name for c in sides[side]}
            for name in CATCH_ALL_NAMES:
                if name not in present:
                    sides[side].append(PortCategory(name))
        return cls(sides["src"], sides["dst"])


def load_vocabulary(path) -> PortVocabulary:
    with open(path) as fh:
        return PortVocabulary.from_json(json.load(fh))


def save_vocabulary(vocab: PortVocabulary, path) -> None:
    with open(path, "w") as fh:
        json.dump(vocab.to_json(), fh, indent=1)


def port_category(port: int, side: str, vocab: PortVocabulary) -> int:
    """Index of the unique service category claiming ``port`` on ``side``."""
    return vocab.category_index(port, side)


# ---------------------------------------------------------------------------
# Flow (edge) features
# ---------------------------------------------------------------------------

_GLOBAL_NAMES = ("duration", "dur_zero", "pkts", "bytes", "bytes_per_pkt", "pps", "bps")
_SIZE_NAMES = ("size_min", "size_max", "size_mean", "size_var")
_IAT_NAMES = ("iat_mean", "iat_std", "iat_min", "iat_max")
_DIR_SUFFIXES = (
    "pkts",
    "bytes",
    "pps",
    "bps",
    "size_mean",
    "size_var",
    "size_min",
    "size_max",
    "iat_mean",
    "iat_std",
    "iat_min",
    "iat_max",
)
PROTO_ORDER = ("tcp", "udp", "icmp", "icmpv6")


def edge_feature_names(vocab: Optional[PortVocabulary] = None) -> tuple[str, ...]:
    vocab = vocab or PortVocabulary.default()
    names = list(_GLOBAL_NAMES + _SIZE_NAMES + _IAT_NAMES)
    names += [f"dir_a2b_{s}" for s in _DIR_SUFFIXES]
    names += [f"dir_b2a_{s}" for s in _DIR_SUFFIXES]
    names += [f"proto_{p}" for p in PROTO_ORDER]
    names += [f"src_port_cat_{n}" for n in vocab.names("src")]
    names += [f"dst_port_cat_{n}" for n in vocab.names("dst")]
    return tuple(names)


def _rate(count: float, duration: float) -> float:
    """Count per second; degenerates to the raw count for instant flows."""
    return count / duration if duration > 0 else float(count)


def _direction_block(d: DirectionStats, duration: float) -> list[float]:
    if d.pkts == 0:
        return [0.0] * len(_DIR_SUFFIXES)
    mean = d.size_sum / d.pkts
    var = max(d.size_sumsq / d.pkts - mean * mean, 0.0)
    n_gaps = d.pkts - 1
    if n_gaps > 0:
        iat_mean = d.iat_sum / n_gaps
        iat_var = max(d.iat_sumsq / n_gaps - iat_mean * iat_mean, 0.0)
        iat = [iat_mean, math.sqrt(iat_var), d.iat_min, d.iat_max]
    else:
        iat = [0.0, 0.0, 0.0, 0.0]
    return [
        float(d.pkts),
        float(d.bytes),
        _rate(d.pkts, duration),
        _rate(d.bytes, duration),
        mean,
        var,
        d.size_min,
        d.size_max,
    ] + iat


def edge_features(flow: FlowRecord, vocab: Optional[PortVocabulary] = None) -> np.ndarray:
    """98-value feature vector of a terminated flow, in canonical order."""
    vocab = vocab or PortVocabulary.default()
    dur = flow.duration
    pkts = flow.pkts
    total_bytes = flow.bytes

    size_sum = flow.a2b.size_sum + flow.b2a.size_sum
    size_sumsq = flow.a2b.size_sumsq + flow.b2a.size_sumsq
    size_mean = size_sum / pkts
    size_var = max(size_sumsq / pkts - size_mean * size_mean, 0.0)

    g = flow.gaps
    if g.count > 0:
        iat_mean = g.sum / g.count
        iat_var = max(g.sumsq / g.count - iat_mean * iat_mean, 0.0)
        iat = [iat_mean, math.sqrt(iat_var), g.min, g.max]
    else:
        iat = [0.0, 0.0, 0.0, 0.0]

    values = [
        dur,
        1.0 if dur == 0 else 0.0,
        float(pkts),
        float(total_bytes),
        total_bytes / pkts,
        _rate(pkts, dur),
        _rate(total_bytes, dur),
        flow.size_min(),
        flow.size_max(),
        size_mean,
        size_var,
    ]
    values += iat
    values += _direction_block(flow.a2b, dur)
    values += _direction_block(flow.b2a, dur)
    values += [1.0 if flow.key.proto == p else 0.0 for p in PROTO_ORDER]

    src_port = flow.initiator[1]
    dst_port = flow.responder[1]
    src_hot = [0.0] * len(vocab.src)
    src_hot[vocab.category_index(src_port, "src")] = 1.0
    dst_hot = [0.0] * len(vocab.dst)
    dst_hot[vocab.category_index(dst_port, "dst")] = 1.0
    values += src_hot
    values += dst_hot

    vec = np.asarray(values, dtype=np.float64)
    assert vec.shape == (EDGE_FEATURE_DIM,)
    return vec


# ---------------------------------------------------------------------------
# Device (node) features
# ---------------------------------------------------------------------------

NODE_FEATURE_NAMES = (
    "bytes_out",
    "pkts_out",
    "bytes_in",
    "pkts_in",
    "mean_bytes_out",
    "std_bytes_out",
    "mean_bytes_in",
    "std_bytes_in",
    "mean_bps_out",
    "mean_pps_out",
    "mean_bps_in",
    "mean_pps_in",
    "tcp_flag",
    "udp_flag",
    "icmp_flag",
    "ratio_bytes_out_in",
    "ratio_flows_out_in",
)


def _device_direction(flow: FlowRecord, device_ip: bytes) -> tuple[DirectionStats, DirectionStats]:
    """(sent, received) directions of a flow from one device's viewpoint.

    "Sent" are packets whose source side is the device, "received" are
    packets whose destination side is the device; for self-flows both
    views cover the whole flow, which keeps per-snapshot byte/packet
    totals conserved.
    """
    is_lo = flow.key.lo_ip == device_ip
    is_hi = flow.key.hi_ip == device_ip
    if is_lo and is_hi:
        merged = DirectionStats(
            pkts=flow.pkts,
            bytes=flow.bytes,
            size_sum=flow.a2b.size_sum + flow.b2a.size_sum,
            size_sumsq=flow.a2b.size_sumsq + flow.b2a.size_sumsq,
        )
        return merged, merged
    if is_lo:
        return flow.a2b, flow.b2a
    if is_hi:
        return flow.b2a, flow.a2b
    raise ValueError("flow is not incident to the device")


def node_features(device_ip: bytes, flows: Sequence[FlowRecord]) -> np.ndarray:
    """17-value aggregate over the flows incident to one device."""
    if not flows:
        vec = np.zeros(NODE_FEATURE_DIM)
        vec[15] = 1.0
        vec[16] = 1.0
        return vec

    out_bytes, out_pkts, in_bytes, in_pkts = [], [], [], []
    out_bps, out_pps, in_bps, in_pps = [], [], [], []
    tcp = udp = icmp = 0.0
    initiated = 0
    for flow in flows:
        sent, recv = _device_direction(flow, device_ip)
        out_bytes.append(sent.bytes)
        out_pkts.append(sent.pkts)
        in_bytes.append(recv.bytes)
        in_pkts.append(recv.pkts)
        out_bps.append(_rate(sent.bytes, flow.duration))
        out_pps.append(_rate(sent.pkts, flow.duration))
        in_bps.append(_rate(recv.bytes, flow.duration))
        in_pps.append(_rate(recv.pkts, flow.duration))
        if flow.key.proto == "tcp":
            tcp = 1.0
        elif flow.key.proto == "udp":
            udp = 1.0
        else:
            icmp = 1.0
        if flow.initiator[0] == device_ip:
            initiated += 1

    ob = np.asarray(out_bytes, dtype=np.float64)
    ib = np.asarray(in_bytes, dtype=np.float64)
    total_out = float(ob.sum())
    total_in = float(ib.sum())
    received = len(flows) - initiated
    vec = np.array(
        [
            total_out,
            float(sum(out_pkts)),
            total_in,
            float(sum(in_pkts)),
            float(ob.mean()),
            float(ob.std()),
            float(ib.mean()),
            float(ib.std()),
            float(np.mean(out_bps)),
            float(np.mean(out_pps)),
            float(np.mean(in_bps)),
            float(np.mean(in_pps)),
            tcp,
            udp,
            icmp,
            (total_out + 1.0) / (total_in + 1.0),
            (initiated + 1.0) / (received + 1.0),
        ]
    )
    assert vec.shape == (NODE_FEATURE_DIM,)
    return vec


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


@dataclass
class Standardizer:
    """Per-column z-score transform fitted on training data only.

    Columns with zero spread keep a unit divisor so constant features map
    to 0 instead of NaN.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "Standardizer":
        matrix = np.asarray(matrix, dtype=np.float64)
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (np.asarray(matrix, dtype=np.float64) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Standardizer":
        return cls(mean=np.asarray(doc["mean"], dtype=np.float64), std=np.asarray(doc["std"], dtype=np.float64))
