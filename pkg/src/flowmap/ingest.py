"""Packet-event ingestion: canonical flow keys and fixed-window segmentation.

A time-ordered stream of packet events is folded into bidirectional flow
records. Both directions of a session map to one flow through a canonical
key (the lexicographically smaller (ip, port) endpoint first), and a flow
is terminated once a packet arrives more than ``FLOW_WINDOW_SECONDS``
after the flow opened, regardless of protocol flags or idle gaps.

IP addresses are kept as packed byte strings so endpoint ordering is
numeric, never textual.
"""

from __future__ import annotations

import csv
import ipaddress
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

from .errors import DataError

FLOW_WINDOW_SECONDS = 10.0

PROTOCOLS = ("tcp", "udp", "icmp", "icmpv6")

PACKET_CSV_FIELDS = (
    "ts",
    "src_ip",
    "src_port",
    "dst_ip",
    "dst_port",
    "proto",
    "length",
    "tcp_flags",
    "label",
)


class OutOfOrderTimestamp(DataError):
    """A packet timestamp regressed beyond the configured slack."""


def ip_bytes(address: str) -> bytes:
    """Packed numeric form of an IPv4/IPv6 address (4 or 16 bytes)."""
    return ipaddress.ip_address(address).packed


def ip_text(packed: bytes) -> str:
    return str(ipaddress.ip_address(packed))


@dataclass(frozen=True, slots=True)
class PacketEvent:
    """One observed packet. ``tcp_flags`` is a raw bitfield, if captured."""

    ts: float
    src_ip: bytes
    src_port: int
    dst_ip: bytes
    dst_port: int
    proto: str
    length: int
    tcp_flags: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        if not math.isfinite(self.ts):
            raise DataError(f"non-finite timestamp {self.ts!r}")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise DataError(f"port {port} out of range")
        if self.proto not in PROTOCOLS:
            raise DataError(f"unknown protocol {self.proto!r}")
        if self.length < 0:
            raise DataError(f"negative packet length {self.length}")
        if len(self.src_ip) not in (4, 16) or len(self.dst_ip) not in (4, 16):
            raise DataError("IP addresses must be 4- or 16-byte packed values")


@dataclass(frozen=True)
class FlowKey:
    """Direction-invariant flow identifier.

    ``(lo_ip, lo_port)`` is the lexicographic minimum of the two
    (ip-bytes, port) endpoints, so swapping a packet's source and
    destination yields the same key. The protocol is part of the key:
    concurrent TCP and UDP between the same endpoints are distinct flows.
    """

    lo_ip: bytes
    lo_port: int
    hi_ip: bytes
    hi_port: int
    proto: str

    @property
    def endpoint_lo(self) -> tuple[bytes, int]:
        return (self.lo_ip, self.lo_port)

    @property
    def endpoint_hi(self) -> tuple[bytes, int]:
        return (self.hi_ip, self.hi_port)


def canonical_key(pkt: PacketEvent) -> FlowKey:
    """Canonical key of a packet: endpoints ordered by (ip bytes, port)."""
    a = (pkt.src_ip, pkt.src_port)
    b = (pkt.dst_ip, pkt.dst_port)
    lo, hi = (a, b) if a <= b else (b, a)
    return FlowKey(lo[0], lo[1], hi[0], hi[1], pkt.proto)


@dataclass
class DirectionStats:
    """Accumulators for one direction of a flow (sizes and arrival gaps)."""

    pkts: int = 0
    bytes: int = 0
    size_min: float = math.inf
    size_max: float = -math.inf
    size_sum: float = 0.0
    size_sumsq: float = 0.0
    last_ts: float = math.nan
    iat_sum: float = 0.0
    iat_sumsq: float = 0.0
    iat_min: float = math.inf
    iat_max: float = -math.inf

    def add(self, ts: float, length: int) -> None:
        self.pkts += 1
        self.bytes += length
        self.size_min = min(self.size_min, float(length))
        self.size_max = max(self.size_max, float(length))
        self.size_sum += length
        self.size_sumsq += float(length) * length
        if not math.isnan(self.last_ts):
            gap = max(ts - self.last_ts, 0.0)
            self.iat_sum += gap
            self.iat_sumsq += gap * gap
            self.iat_min = min(self.iat_min, gap)
            self.iat_max = max(self.iat_max, gap)
        self.last_ts = ts

    def frozen(self) -> "DirectionStats":
        """Copy with sentinel min/max values normalised to 0 when unset."""
        out = replace(self)
        if out.pkts == 0:
            out.size_min = 0.0
            out.size_max = 0.0
        if out.pkts < 2:
            out.iat_min = 0.0
            out.iat_max = 0.0
        return out


@dataclass
class GapStats:
    """Inter-arrival accumulators over the combined packet sequence.

    Kept separately because the bidirectional gap sequence cannot be
    reconstructed from the two per-direction sequences.
    """

    last_ts: float = math.nan
    count: int = 0
    sum: float = 0.0
    sumsq: float = 0.0
    min: float = math.inf
    max: float = -math.inf

    def add(self, ts: float) -> None:
        if not math.isnan(self.last_ts):
            gap = max(ts - self.last_ts, 0.0)
            self.count += 1
            self.sum += gap
            self.sumsq += gap * gap
            self.min = min(self.min, gap)
            self.max = max(self.max, gap)
        self.last_ts = ts

    def frozen(self) -> "GapStats":
        out = replace(self)
        if out.count == 0:
            out.min = 0.0
            out.max = 0.0
        return out


@dataclass
class FlowState:
    """Mutable per-flow state while the flow is active."""

    key: FlowKey
    t_start: float
    t_last: float
    a2b: DirectionStats = field(default_factory=DirectionStats)
    b2a: DirectionStats = field(default_factory=DirectionStats)
    gaps: GapStats = field(default_factory=GapStats)
    tcp_flags: int = 0
    label: Optional[str] = None
    initiator_is_lo: bool = True

    def update(self, pkt: PacketEvent) -> None:
        ts = max(pkt.ts, self.t_last)
        self.t_last = ts
        # A is the endpoint_lo side of the canonical key.
        if (pkt.src_ip, pkt.src_port) == self.key.endpoint_lo:
            self.a2b.add(ts, pkt.length)
        else:
            self.b2a.add(ts, pkt.length)
        self.gaps.add(ts)
        if pkt.tcp_flags is not None:
            self.tcp_flags |= pkt.tcp_flags

    def freeze(self) -> "FlowRecord":
        return FlowRecord(
            key=self.key,
            t_start=self.t_start,
            t_last=self.t_last,
            a2b=self.a2b.frozen(),
            b2a=self.b2a.frozen(),
            gaps=self.gaps.frozen(),
            tcp_flags=self.tcp_flags,
            label=self.label,
            initiator_is_lo=self.initiator_is_lo,
        )


@dataclass(frozen=True)
class FlowRecord:
    """A terminated flow with per-direction statistics.

    ``initiator_is_lo`` records which endpoint sent the first packet;
    that endpoint is the flow's source in graph construction.
    """

    key: FlowKey
    t_start: float
    t_last: float
    a2b: DirectionStats
    b2a: DirectionStats
    gaps: GapStats
    tcp_flags: int
    label: Optional[str]
    initiator_is_lo: bool

    @property
    def duration(self) -> float:
        return self.t_last - self.t_start

    @property
    def pkts(self) -> int:
        return self.a2b.pkts + self.b2a.pkts

    @property
    def bytes(self) -> int:
        return self.a2b.bytes + self.b2a.bytes

    @property
    def initiator(self) -> tuple[bytes, int]:
        return self.key.endpoint_lo if self.initiator_is_lo else self.key.endpoint_hi

    @property
    def responder(self) -> tuple[bytes, int]:
        return self.key.endpoint_hi if self.initiator_is_lo else self.key.endpoint_lo

    def size_min(self) -> float:
        parts = [d.size_min for d in (self.a2b, self.b2a) if d.pkts > 0]
        return min(parts) if parts else 0.0

    def size_max(self) -> float:
        parts = [d.size_max for d in (self.a2b, self.b2a) if d.pkts > 0]
        return max(parts) if parts else 0.0


class FlowTable:
    """Active flow table: at most one open state per canonical key.

    Single-writer: one table is owned by one ingesting thread. Records
    returned by :meth:`ingest` / :meth:`flush_all` are frozen and safe to
    share.
    """

    def __init__(self, window: float = FLOW_WINDOW_SECONDS, slack: float = 0.0):
        self.window = float(window)
        self.slack = float(slack)
        self._states: dict[FlowKey, FlowState] = {}
        self._clock = -math.inf

    def __len__(self) -> int:
        return len(self._states)

    def ingest(self, pkt: PacketEvent) -> list[FlowRecord]:
        """Feed one packet; return any flow flushed by the window rule."""
        if pkt.ts < self._clock - self.slack:
            raise OutOfOrderTimestamp(
                f"timestamp {pkt.ts!r} precedes {self._clock!r} by more than slack={self.slack}"
            )
        self._clock = max(self._clock, pkt.ts)

        key = canonical_key(pkt)
        flushed: list[FlowRecord] = []
        state = self._states.get(key)
        if state is not None and pkt.ts - state.t_start > self.window:
            flushed.append(state.freeze())
            state = None
        if state is None:
            state = FlowState(
                key=key,
                t_start=pkt.ts,
                t_last=pkt.ts,
                label=pkt.label,
                initiator_is_lo=(pkt.src_ip, pkt.src_port) == key.endpoint_lo,
            )
            self._states[key] = state
        state.update(pkt)
        return flushed

    def flush_all(self, now: Optional[float] = None) -> list[FlowRecord]:
        """Freeze and emit every active flow; the table ends up empty."""
        records = [state.freeze() for state in self._states.values()]
        self._states.clear()
        if now is not None:
            self._clock = max(self._clock, now)
        return records


def ingest_packet(table: FlowTable, pkt: PacketEvent) -> list[FlowRecord]:
    return table.ingest(pkt)


def flush_all(table: FlowTable, now: Optional[float] = None) -> list[FlowRecord]:
    return table.flush_all(now)


def segment_stream(
    events: Iterable[PacketEvent],
    window: float = FLOW_WINDOW_SECONDS,
    slack: float = 0.0,
) -> Iterator[FlowRecord]:
    """Run a full stream through a fresh table, flushing leftovers at the end."""
    table = FlowTable(window=window, slack=slack)
    for pkt in events:
        yield from table.ingest(pkt)
    yield from table.flush_all()


# ---------------------------------------------------------------------------
# Packet-event I/O
# ---------------------------------------------------------------------------


def _parse_flags(text: str) -> Optional[int]:
    text = text.strip()
    if not text:
        return None
    return int(text, 16)


def _packet_from_fields(row: dict) -> PacketEvent:
    label = row.get("label")
    if label == "":
        label = None
    return PacketEvent(
        ts=float(row["ts"]),
        src_ip=ip_bytes(row["src_ip"]),
        src_port=int(row["src_port"]),
        dst_ip=ip_bytes(row["dst_ip"]),
        dst_port=int(row["dst_port"]),
        proto=row["proto"],
        length=int(row["length"]),
        tcp_flags=_parse_flags(str(row.get("tcp_flags") or "")),
        label=label,
    )


def read_packets_csv(path) -> list[PacketEvent]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(PACKET_CSV_FIELDS[:7]) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"packet CSV missing columns: {sorted(missing)}")
        return [_packet_from_fields(row) for row in reader]


def read_packets_jsonl(path) -> list[PacketEvent]:
    events = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(_packet_from_fields(json.loads(line)))
    return events


def write_packets_csv(events: Iterable[PacketEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PACKET_CSV_FIELDS)
        for e in events:
            writer.writerow(
                [
                    repr(e.ts),
                    ip_text(e.src_ip),
                    e.src_port,
                    ip_text(e.dst_ip),
                    e.dst_port,
                    e.proto,
                    e.length,
                    "" if e.tcp_flags is None else f"0x{e.tcp_flags:x}",
                    e.label or "",
                ]
            )


# ---------------------------------------------------------------------------
# Flow-record I/O
# ---------------------------------------------------------------------------

_DIR_FIELDS = (
    "pkts",
    "bytes",
    "size_min",
    "size_max",
    "size_sum",
    "size_sumsq",
    "iat_sum",
    "iat_sumsq",
    "iat_min",
    "iat_max",
)

FLOW_CSV_FIELDS = (
    ("lo_ip", "lo_port", "hi_ip", "hi_port", "proto", "t_start", "t_last", "duration")
    + ("initiator", "label", "tcp_flags")
    + tuple(f"a2b_{f}" for f in _DIR_FIELDS)
    + tuple(f"b2a_{f}" for f in _DIR_FIELDS)
    + ("iat_count", "iat_sum", "iat_sumsq", "iat_min", "iat_max")
)


def _dir_row(d: DirectionStats) -> list:
    return [
        d.pkts,
        d.bytes,
        repr(d.size_min),
        repr(d.size_max),
        repr(d.size_sum),
        repr(d.size_sumsq),
        repr(d.iat_sum),
        repr(d.iat_sumsq),
        repr(d.iat_min),
        repr(d.iat_max),
    ]


def _dir_from_row(row: dict, prefix: str) -> DirectionStats:
    return DirectionStats(
        pkts=int(row[f"{prefix}_pkts"]),
        bytes=int(row[f"{prefix}_bytes"]),
        size_min=float(row[f"{prefix}_size_min"]),
        size_max=float(row[f"{prefix}_size_max"]),
        size_sum=float(row[f"{prefix}_size_sum"]),
        size_sumsq=float(row[f"{prefix}_size_sumsq"]),
        last_ts=math.nan,
        iat_sum=float(row[f"{prefix}_iat_sum"]),
        iat_sumsq=float(row[f"{prefix}_iat_sumsq"]),
        iat_min=float(row[f"{prefix}_iat_min"]),
        iat_max=float(row[f"{prefix}_iat_max"]),
    )


def write_flows_csv(records: Iterable[FlowRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FLOW_CSV_FIELDS)
        for r in records:
            row = [
                ip_text(r.key.lo_ip),
                r.key.lo_port,
                ip_text(r.key.hi_ip),
                r.key.hi_port,
                r.key.proto,
                repr(r.t_start),
                repr(r.t_last),
                repr(r.duration),
                "lo" if r.initiator_is_lo else "hi",
                r.label or "",
                f"0x{r.tcp_flags:x}",
            ]
            row += _dir_row(r.a2b)
            row += _dir_row(r.b2a)
            row += [
                r.gaps.count,
                repr(r.gaps.sum),
                repr(r.gaps.sumsq),
                repr(r.gaps.min),
                repr(r.gaps.max),
            ]
            writer.writerow(row)


def read_flows_csv(path) -> list[FlowRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(FLOW_CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"flow CSV missing columns: {sorted(missing)}")
        for row in reader:
            key = FlowKey(
                lo_ip=ip_bytes(row["lo_ip"]),
                lo_port=int(row["lo_port"]),
                hi_ip=ip_bytes(row["hi_ip"]),
                hi_port=int(row["hi_port"]),
                proto=row["proto"],
            )
            gaps = GapStats(
                last_ts=math.nan,
                count=int(row["iat_count"]),
                sum=float(row["iat_sum"]),
                sumsq=float(row["iat_sumsq"]),
                min=float(row["iat_min"]),
                max=float(row["iat_max"]),
            )
            records.append(
                FlowRecord(
                    key=key,
                    t_start=float(row["t_start"]),
                    t_last=float(row["t_last"]),
                    a2b=_dir_from_row(row, "a2b"),
                    b2a=_dir_from_row(row, "b2a"),
                    gaps=gaps,
                    tcp_flags=int(row["tcp_flags"], 16),
                    label=row["label"] or None,
                    initiator_is_lo=row["initiator"] == "lo",
                )
            )
    return records
