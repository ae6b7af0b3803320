"""Deterministic synthetic packet streams with class profiles and drift.

Four traffic classes echo common intrusion-detection macro-categories:

* ``benign`` — longer bidirectional service sessions at modest rates;
* ``dos`` — short unidirectional floods of small packets at high rate;
* ``recon`` — single-packet probes fanning across low destination ports;
* ``mirai_like`` — short telnet/adb-style intrusion bursts whose
  parameters can be interpolated toward the ``dos`` profile over time
  (the "mimicry" schedule), which lets drift experiments reproduce a
  class migrating into another class's region.

Everything derives from one seed: identical configs produce byte-identical
streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .ingest import PacketEvent

CLASS_ORDER = ("benign", "dos", "mirai_like", "recon")

MAX_FLOW_SECONDS = 9.5  # keep generated flows inside one 10 s window

SYN = 0x02
ACK = 0x10
PSH_ACK = 0x18


class InvalidConfig(ConfigError):
    """Scenario configuration violates an invariant."""


@dataclass(frozen=True)
class FlowProfile:
    """Distribution parameters for one traffic class.

    ``protos`` and ``dst_ports`` are weighted categorical choices;
    ``dst_ports`` entries are inclusive (lo, hi, weight) ranges. Packet
    sizes are log-normal, packet inter-arrivals exponential at
    ``pkt_rate``, flow durations exponential at ``duration_mean`` (0
    collapses the flow to a single packet).
    """

    protos: tuple[tuple[str, float], ...]
    pkt_rate: float
    size_log_mean: float
    size_log_sigma: float
    duration_mean: float
    reverse_frac: float
    dst_ports: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if self.pkt_rate <= 0:
            raise InvalidConfig("pkt_rate must be positive")
        if not 0.0 <= self.reverse_frac <= 1.0:
            raise InvalidConfig("reverse_frac must lie in [0, 1]")
        if self.duration_mean < 0:
            raise InvalidConfig("duration_mean must be >= 0")
        for weights in (self.protos, tuple((w,) for *_, w in self.dst_ports)):
            if weights and abs(math.fsum(w[-1] for w in weights) - 1.0) > 1e-9:
                raise InvalidConfig("categorical weights must sum to 1")


def _mix_categories(base: tuple, target: tuple, m: float) -> tuple:
    """Weighted mixture of two categorical choice tables."""
    merged: dict = {}
    for *key, w in base:
        merged[tuple(key)] = merged.get(tuple(key), 0.0) + (1.0 - m) * w
    for *key, w in target:
        merged[tuple(key)] = merged.get(tuple(key), 0.0) + m * w
    return tuple(
        (*key, w) for key, w in sorted(merged.items()) if w > 0.0
    )


def interpolate_profile(base: FlowProfile, target: FlowProfile, m: float) -> FlowProfile:
    """Blend ``base`` toward ``target`` by mimicry strength ``m`` in [0, 1]."""
    if not 0.0 <= m <= 1.0:
        raise InvalidConfig(f"mimicry value {m} outside [0, 1]")
    if m == 0.0:
        return base
    if m == 1.0:
        return target
    lerp = lambda x, y: (1.0 - m) * x + m * y  # noqa: E731
    return FlowProfile(
        protos=_mix_categories(base.protos, target.protos, m),
        pkt_rate=lerp(base.pkt_rate, target.pkt_rate),
        size_log_mean=lerp(base.size_log_mean, target.size_log_mean),
        size_log_sigma=lerp(base.size_log_sigma, target.size_log_sigma),
        duration_mean=lerp(base.duration_mean, target.duration_mean),
        reverse_frac=lerp(base.reverse_frac, target.reverse_frac),
        dst_ports=_mix_categories(base.dst_ports, target.dst_ports, m),
    )


@dataclass(frozen=True)
class MimicrySchedule:
    """Monotone map from normalized time t in [0, 1] to mimicry strength.

    ``constant`` holds ``value`` everywhere; ``ramp`` rises linearly from
    0 at ``start`` to 1 at ``end`` and clips outside.
    """

    kind: str = "constant"
    value: float = 0.0
    start: float = 0.0
    end: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "ramp"):
            raise InvalidConfig(f"unknown mimicry kind {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise InvalidConfig("constant mimicry value must lie in [0, 1]")
        if self.kind == "ramp" and not self.start < self.end:
            raise InvalidConfig("ramp needs start < end")

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        return min(max((t - self.start) / (self.end - self.start), 0.0), 1.0)


DEFAULT_PROFILES: dict[str, FlowProfile] = {
    "benign": FlowProfile(
        protos=(("tcp", 0.7), ("udp", 0.3)),
        pkt_rate=8.0,
        size_log_mean=math.log(300.0),
        size_log_sigma=0.6,
        duration_mean=4.0,
        reverse_frac=0.45,
        dst_ports=((53, 53, 0.15), (80, 80, 0.2), (123, 123, 0.1), (443, 443, 0.3), (1883, 1883, 0.25)),
    ),
    "dos": FlowProfile(
        protos=(("tcp", 0.5), ("udp", 0.5)),
        pkt_rate=300.0,
        size_log_mean=math.log(64.0),
        size_log_sigma=0.05,
        duration_mean=2.0,
        reverse_frac=0.0,
        dst_ports=((80, 80, 1.0),),
    ),
    # mirai_like starts as an exact twin of recon (telnet/adb-style probe
    # bursts): their per-flow statistics are identically distributed, so
    # a raw-feature projection cannot tell them apart. What separates
    # them is communication structure: bots hammer the small victim set
    # while scanners fan across every device.
    "mirai_like": FlowProfile(
        protos=(("tcp", 1.0),),
        pkt_rate=20.0,
        size_log_mean=math.log(62.0),
        size_log_sigma=0.25,
        duration_mean=0.25,
        reverse_frac=0.0,
        dst_ports=((23, 23, 0.35), (80, 80, 0.15), (2323, 2323, 0.25), (5555, 5555, 0.25)),
    ),
    "recon": FlowProfile(
        protos=(("tcp", 1.0),),
        pkt_rate=20.0,
        size_log_mean=math.log(62.0),
        size_log_sigma=0.25,
        duration_mean=0.25,
        reverse_frac=0.0,
        dst_ports=((23, 23, 0.35), (80, 80, 0.15), (2323, 2323, 0.25), (5555, 5555, 0.25)),
    ),
}

DEFAULT_FLOW_COUNTS = {"benign": 700, "dos": 500, "mirai_like": 400, "recon": 400}


@dataclass
class ScenarioConfig:
    seed: int = 7
    n_devices: int = 40
    horizon: float = 600.0
    flow_counts: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_FLOW_COUNTS))
    profiles: dict[str, FlowProfile] = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    mimicry: MimicrySchedule = field(default_factory=MimicrySchedule)
    separability_margin: float = 3.0

    def __post_init__(self):
        if self.n_devices < 8:
            raise InvalidConfig("need at least 8 devices to assign roles")
        if self.horizon <= 0:
            raise InvalidConfig("horizon must be positive")
        for name, count in self.flow_counts.items():
            if name not in CLASS_ORDER:
                raise InvalidConfig(f"unknown traffic class {name!r}")
            if count < 0:
                raise InvalidConfig("flow counts must be >= 0")
        missing = set(CLASS_ORDER) - set(self.profiles)
        if missing:
            raise InvalidConfig(f"profiles missing for classes: {sorted(missing)}")
        if self.mimicry(0.0) > self.mimicry(1.0):
            raise InvalidConfig("mimicry must be monotone non-decreasing")


def drift_scenario(seed: int = 7, **overrides) -> ScenarioConfig:
    """Scenario whose mirai-like traffic ramps into the dos profile.

    The training quarter of the horizon sees the undrifted profile; the
    mimicry strength then rises linearly to 1 at the end of the capture.
    """
    cfg = ScenarioConfig(seed=seed, mimicry=MimicrySchedule(kind="ramp", start=0.25, end=1.0))
    return replace(cfg, **overrides) if overrides else cfg


@dataclass
class DeviceRoles:
    """Deterministic role assignment over the device list."""

    servers: list[bytes]
    victims: list[bytes]
    bots: list[bytes]
    scanners: list[bytes]
    attackers: list[bytes]
    clients: list[bytes]
    all: list[bytes]


def device_address(index: int) -> bytes:
    """Deterministic 10.0.0.0/16 address for device ``index``."""
    if not 0 <= index < 65534:
        raise InvalidConfig("device index outside the 10.0.0.0/16 pool")
    host = index + 1
    return bytes([10, 0, host >> 8, host & 0xFF])


def assign_roles(n_devices: int) -> DeviceRoles:
    devices = [device_address(i) for i in range(n_devices)]
    n_srv = max(2, n_devices // 5)
    n_vic = max(2, n_devices // 10)
    n_bot = max(2, n_devices // 10)
    n_scan = max(1, n_devices // 20)
    n_atk = max(2, n_devices // 10)
    cut = 0
    servers = devices[cut : cut + n_srv]
    cut += n_srv
    victims = devices[cut : cut + n_vic]
    cut += n_vic
    bots = devices[cut : cut + n_bot]
    cut += n_bot
    scanners = devices[cut : cut + n_scan]
    cut += n_scan
    attackers = devices[cut : cut + n_atk]
    cut += n_atk
    clients = devices[cut:] or devices[:1]
    return DeviceRoles(servers, victims, bots, scanners, attackers, clients, devices)


def _choose(rng: np.random.Generator, table: tuple) -> tuple:
    weights = np.asarray([row[-1] for row in table])
    pick = rng.choice(len(table), p=weights / weights.sum())
    return table[pick][:-1]


def _endpoints(cls: str, roles: DeviceRoles, rng: np.random.Generator) -> tuple[bytes, bytes]:
    if cls == "benign":
        src = roles.clients[rng.integers(len(roles.clients))]
        dst = roles.servers[rng.integers(len(roles.servers))]
    elif cls == "dos":
        src = roles.attackers[rng.integers(len(roles.attackers))]
        dst = roles.victims[rng.integers(len(roles.victims))]
    elif cls == "mirai_like":
        src = roles.bots[rng.integers(len(roles.bots))]
        dst = roles.victims[rng.integers(len(roles.victims))]
    else:  # recon scans everything
        src = roles.scanners[rng.integers(len(roles.scanners))]
        dst = roles.all[rng.integers(len(roles.all))]
    return src, dst


def _flow_packets(
    cls: str,
    profile: FlowProfile,
    src: bytes,
    dst: bytes,
    src_port: int,
    t0: float,
    rng: np.random.Generator,
) -> list[PacketEvent]:
    (proto,) = _choose(rng, profile.protos)
    lo, hi = _choose(rng, profile.dst_ports)
    dst_port = int(rng.integers(lo, hi + 1)) if hi > lo else lo

    budget = min(rng.exponential(profile.duration_mean), MAX_FLOW_SECONDS) if profile.duration_mean > 0 else 0.0
    times = [t0]
    while budget > 0:
        gap = rng.exponential(1.0 / profile.pkt_rate)
        if times[-1] + gap > t0 + budget:
            break
        times.append(times[-1] + gap)

    sizes = np.maximum(np.round(rng.lognormal(profile.size_log_mean, profile.size_log_sigma, len(times))), 1.0)
    reverse = rng.random(len(times)) < profile.reverse_frac
    reverse[0] = False  # the initiator speaks first

    packets = []
    for i, ts in enumerate(times):
        if proto == "tcp":
            flags = SYN if i == 0 else (PSH_ACK if i == len(times) - 1 else ACK)
        else:
            flags = None
        s_ip, s_port, d_ip, d_port = (src, src_port, dst, dst_port)
        if reverse[i]:
            s_ip, s_port, d_ip, d_port = (dst, dst_port, src, src_port)
        packets.append(
            PacketEvent(
                ts=float(ts),
                src_ip=s_ip,
                src_port=s_port,
                dst_ip=d_ip,
                dst_port=d_port,
                proto=proto,
                length=int(sizes[i]),
                tcp_flags=flags,
                label=cls,
            )
        )
    return packets


def generate(config: ScenarioConfig) -> list[PacketEvent]:
    """Labeled, time-sorted packet events for the scenario.

    Every generated flow gets a unique ephemeral source port, so flow
    counts survive ingestion exactly (no accidental key collisions), and
    flows are shorter than the 10 s window by construction.
    """
    rng = np.random.default_rng(config.seed)
    roles = assign_roles(config.n_devices)
    events: list[PacketEvent] = []
    next_src_port = 49152

    for cls in CLASS_ORDER:
        count = config.flow_counts.get(cls, 0)
        if count == 0:
            continue
        starts = np.sort(rng.uniform(0.0, config.horizon, size=count))
        for t0 in starts:
            profile = config.profiles[cls]
            if cls == "mirai_like":
                m = config.mimicry(float(t0) / config.horizon)
                profile = interpolate_profile(profile, config.profiles["dos"], m)
            src, dst = _endpoints(cls, roles, rng)
            events.extend(_flow_packets(cls, profile, src, dst, next_src_port, float(t0), rng))
            next_src_port += 1
            if next_src_port > 65535:
                next_src_port = 49152

    events.sort(key=lambda e: e.ts)
    return events
