"""Slice workload generation from the per-type SLA/traffic table."""

from __future__ import annotations

import numpy as np

from slicetel.domain.topology import ACCESS, Topology, three_tier
from slicetel.domain.types import (
    ALL_SLICE_TYPES,
    DEFAULT_TOLERANCE_FRACTION,
    MetricKind,
    PathSpec,
    SliceSpec,
    SliceType,
    TrafficProfile,
)
from slicetel.errors import ConfigError

WORKLOAD_TABLE_VERSION = "1"

# Closed ranges per slice type. Upper-bound-only entries ("<x") use [x/10, x].
# Latency/jitter in ms, loss as a fraction, packet sizes in bytes, rates in Mbps per user.
WORKLOAD_TABLE = {
    SliceType.URLLC: {
        "latency_ms": (1.0, 5.0),
        "jitter_ms": (0.1, 1.0),
        "loss": (1e-6, 1e-5),
        "packet_bytes": (20, 250),
        "rate_mbps": (1.0, 10.0),
        "users": (3, 10),
    },
    SliceType.EMBB: {
        "latency_ms": (10.0, 50.0),
        "jitter_ms": (5.0, 30.0),
        "loss": (1e-3, 1e-2),
        "packet_bytes": (1000, 1500),
        "rate_mbps": (15.0, 50.0),
        "users": (10, 20),
    },
    SliceType.MMTC: {
        "latency_ms": (50.0, 100.0),
        "jitter_ms": (50.0, 100.0),
        "loss": (1e-2, 1e-1),
        "packet_bytes": (20, 125),
        "rate_mbps": (0.001, 0.1),
        "users": (10_000, 10_000),
    },
}

MIXES = {
    "SP": (0.6, 0.2, 0.2),
    "BAL": (1 / 3, 1 / 3, 1 / 3),
    "LP": (0.2, 0.6, 0.2),
}

_SLA_KEYS = {MetricKind.LATENCY: "latency_ms", MetricKind.JITTER: "jitter_ms", MetricKind.LOSS: "loss"}


def type_counts(mix: str, n_slices: int) -> dict[SliceType, int]:
    """Largest-remainder split of ``n_slices`` over the mix fractions."""
    try:
        fractions = MIXES[str(mix).upper()]
    except KeyError:
        raise ConfigError(f"unknown workload mix {mix!r}; expected one of {sorted(MIXES)}", ["mix"]) from None
    raw = [f * n_slices for f in fractions]
    counts = [int(np.floor(r + 1e-9)) for r in raw]
    rest = n_slices - sum(counts)
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return dict(zip(ALL_SLICE_TYPES, counts))


def _assign_path_ids(rng, n: int) -> list[int]:
    ids: list[int] = []
    seen: set[int] = set()
    while len(ids) < n:
        pid = int(rng.integers(0, 1 << 16))
        if pid in seen:
            continue  # regenerate on collision
        seen.add(pid)
        ids.append(pid)
    return ids


def make_workload(
    mix: str,
    n_slices: int,
    seed: int,
    *,
    topology: Topology | None = None,
    tolerance_fraction: float = DEFAULT_TOLERANCE_FRACTION,
    max_paths: int = 2,
    table: dict | None = None,
) -> list[SliceSpec]:
    """Generate ``n_slices`` slices whose type fractions follow ``mix``.

    SLA targets and per-user rates are drawn uniformly (continuous) and packet
    sizes and user counts uniformly (integer) from the ranges in ``table``.
    Ingress/egress access switches are drawn per slice and up to
    ``max_paths`` equal-cost routes become its paths.
    """
    if n_slices < 3:
        raise ConfigError("a workload needs at least 3 slices", ["n_slices"])
    counts = type_counts(mix, n_slices)
    table = table or WORKLOAD_TABLE
    topology = topology or three_tier()
    rng = np.random.default_rng(seed)

    types = [t for t in ALL_SLICE_TYPES for _ in range(counts[t])]
    types = [types[i] for i in rng.permutation(len(types))]
    access = topology.by_tier(ACCESS)

    drafts = []
    for sid, stype in enumerate(types):
        row = table[stype]
        targets = {m: float(rng.uniform(*row[key])) for m, key in _SLA_KEYS.items()}
        lo, hi = row["packet_bytes"]
        ulo, uhi = row["users"]
        traffic = TrafficProfile(
            packet_bytes=(int(lo), int(hi)),
            rate_mbps=float(rng.uniform(*row["rate_mbps"])),
            users=int(rng.integers(ulo, uhi + 1)),
        )
        if len(access) > 1:
            src, dst = (int(x) for x in rng.choice(access, size=2, replace=False))
        else:
            src = dst = access[0]
        routes = topology.routes(src, dst)[:max_paths]
        drafts.append((sid, stype, targets, traffic, routes))

    n_paths = sum(len(d[4]) for d in drafts)
    path_ids = iter(_assign_path_ids(rng, n_paths))
    slices = []
    for sid, stype, targets, traffic, routes in drafts:
        paths = tuple(PathSpec(next(path_ids), r, topology.path_ports(r)) for r in routes)
        tolerances = {m: tolerance_fraction * a for m, a in targets.items()}
        slices.append(SliceSpec(sid, stype, targets, tolerances, paths, traffic))
    return slices


def within_table(slice_: SliceSpec, table: dict | None = None) -> bool:
    row = (table or WORKLOAD_TABLE)[slice_.slice_type]
    for m, key in _SLA_KEYS.items():
        if m in slice_.sla_targets:
            lo, hi = row[key]
            if not lo <= slice_.sla_targets[m] <= hi:
                return False
    return True
