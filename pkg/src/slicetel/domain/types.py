"""Value types shared by every layer: metrics, slices, paths, threshold grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from slicetel.errors import AbsentMetricError, ConfigError

DEFAULT_TOLERANCE_FRACTION = 0.05

NS_PER_MS = 1_000_000


class MetricKind(str, Enum):
    LATENCY = "latency"
    JITTER = "jitter"
    LOSS = "loss"

    @property
    def index(self) -> int:
        return _METRIC_ORDER.index(self)

    @property
    def carries_aux(self) -> bool:
        """Whether the metric ships its auxiliary value in the header."""
        return self is MetricKind.LOSS

    @property
    def signed(self) -> bool:
        return self is MetricKind.JITTER


_METRIC_ORDER = (MetricKind.LATENCY, MetricKind.JITTER, MetricKind.LOSS)
ALL_METRICS = _METRIC_ORDER


class SliceType(str, Enum):
    URLLC = "URLLC"
    EMBB = "eMBB"
    MMTC = "mMTC"

    @property
    def rank(self) -> int:
        """Criticality rank, 0 is most critical."""
        return _TYPE_ORDER.index(self)


_TYPE_ORDER = (SliceType.URLLC, SliceType.EMBB, SliceType.MMTC)
ALL_SLICE_TYPES = _TYPE_ORDER


@dataclass(frozen=True)
class TrafficProfile:
    packet_bytes: tuple[int, int]
    rate_mbps: float  # per user
    users: int

    @property
    def mean_packet_bytes(self) -> float:
        return 0.5 * (self.packet_bytes[0] + self.packet_bytes[1])

    @property
    def total_rate_bps(self) -> float:
        return self.rate_mbps * 1e6 * self.users

    @property
    def packet_rate(self) -> float:
        """Mean aggregate packets per second."""
        if self.total_rate_bps <= 0:
            return 0.0
        return self.total_rate_bps / (8.0 * self.mean_packet_bytes)

    def scaled(self, factor: float) -> "TrafficProfile":
        return TrafficProfile(self.packet_bytes, self.rate_mbps / factor, self.users)


@dataclass(frozen=True)
class PathSpec:
    path_id: int
    hops: tuple[int, ...]
    ports: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.path_id < 1 << 16:
            raise ConfigError(f"path_id {self.path_id} does not fit in 16 bits", ["path_id"])
        if len(self.hops) < 1:
            raise ConfigError("a path needs at least one hop", ["hops"])
        if len(self.ports) != len(self.hops):
            raise ConfigError("one egress port per hop is required", ["ports"])

    def __len__(self):
        return len(self.hops)

    def position(self, node_id: int) -> int:
        return self.hops.index(node_id)

    def upstream_of(self, node_id: int) -> int | None:
        i = self.hops.index(node_id)
        return self.hops[i - 1] if i > 0 else None


@dataclass(frozen=True)
class SliceSpec:
    slice_id: int
    slice_type: SliceType
    sla_targets: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    paths: tuple[PathSpec, ...] = ()
    traffic: TrafficProfile = TrafficProfile((64, 64), 0.0, 0)

    @property
    def metrics(self) -> tuple[MetricKind, ...]:
        return tuple(m for m in ALL_METRICS if m in self.sla_targets)

    def path(self, path_id: int) -> PathSpec:
        for p in self.paths:
            if p.path_id == path_id:
                return p
        raise KeyError(path_id)


def tolerance_of(slice_: SliceSpec, metric: MetricKind, fraction: float | None = None) -> float:
    """Monitoring error tolerance in SLA units (ms for latency/jitter, fraction for loss)."""
    metric = MetricKind(metric)
    if metric not in slice_.sla_targets:
        raise AbsentMetricError(f"slice {slice_.slice_id} has no SLA target for {metric.value}")
    if fraction is None:
        if metric in slice_.tolerances:
            return slice_.tolerances[metric]
        fraction = DEFAULT_TOLERANCE_FRACTION
    return fraction * slice_.sla_targets[metric]


def to_dataplane_units(metric: MetricKind, value: float, loss_scale: float = 1.0) -> float:
    """Convert an SLA-unit quantity into the unit the switches compute in.

    Latency and jitter run in nanoseconds; loss is a packet count, so a loss
    fraction is multiplied by ``loss_scale`` (the packets it is normalised by).
    """
    if metric is MetricKind.LOSS:
        return value * loss_scale
    return value * NS_PER_MS


def from_dataplane_units(metric: MetricKind, value: float, loss_scale: float = 1.0) -> float:
    if metric is MetricKind.LOSS:
        return value / loss_scale if loss_scale else math.nan
    return value / NS_PER_MS


DEFAULT_GRID_CODES = (0, 1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192)


@dataclass(frozen=True)
class CandidateGrid:
    """Fixed-point threshold candidates: ``value = step * code``."""

    step: float
    codes: tuple[int, ...] = DEFAULT_GRID_CODES
    bit_width: int = 8

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise ConfigError(f"grid step must be finite and positive, got {self.step}", ["step"])
        if not self.codes:
            raise ConfigError("grid needs at least one candidate", ["codes"])
        if len(self.codes) > 1 << self.bit_width:
            raise ConfigError("more candidates than the bit width can represent", ["codes"])
        if any(c < 0 or c >= 1 << self.bit_width for c in self.codes):
            raise ConfigError("candidate code outside the fixed-point range", ["codes"])
        if any(b <= a for a, b in zip(self.codes, self.codes[1:])):
            raise ConfigError("candidates must be strictly increasing", ["codes"])

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(self.step * c for c in self.codes)

    def __len__(self):
        return len(self.codes)

    @classmethod
    def for_tolerance(cls, tolerance: float, divisions: int = 32, codes=DEFAULT_GRID_CODES):
        """Grid whose step is ``tolerance / divisions``."""
        return cls(step=tolerance / divisions, codes=tuple(codes))
