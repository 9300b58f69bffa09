"""YAML round-trip for workloads and topologies. Units are spelled out in keys."""

from __future__ import annotations

from pathlib import Path

import yaml

from slicetel.domain.topology import Topology
from slicetel.domain.types import MetricKind, PathSpec, SliceSpec, SliceType, TrafficProfile
from slicetel.domain.workload import WORKLOAD_TABLE_VERSION
from slicetel.errors import ConfigError

_TARGET_KEYS = {MetricKind.LATENCY: "latency_ms", MetricKind.JITTER: "jitter_ms", MetricKind.LOSS: "loss_fraction"}


def slice_to_dict(s: SliceSpec) -> dict:
    return {
        "slice_id": s.slice_id,
        "slice_type": s.slice_type.value,
        "sla": {_TARGET_KEYS[m]: v for m, v in s.sla_targets.items()},
        "tolerance": {_TARGET_KEYS[m]: v for m, v in s.tolerances.items()},
        "paths": [{"path_id": p.path_id, "hops": list(p.hops), "ports": list(p.ports)} for p in s.paths],
        "traffic": {
            "packet_bytes": list(s.traffic.packet_bytes),
            "rate_mbps_per_user": s.traffic.rate_mbps,
            "users": s.traffic.users,
        },
    }


def slice_from_dict(d: dict) -> SliceSpec:
    inverse = {v: k for k, v in _TARGET_KEYS.items()}
    try:
        t = d["traffic"]
        return SliceSpec(
            slice_id=int(d["slice_id"]),
            slice_type=SliceType(d["slice_type"]),
            sla_targets={inverse[k]: float(v) for k, v in d["sla"].items()},
            tolerances={inverse[k]: float(v) for k, v in d.get("tolerance", {}).items()},
            paths=tuple(PathSpec(int(p["path_id"]), tuple(p["hops"]), tuple(p["ports"])) for p in d["paths"]),
            traffic=TrafficProfile(tuple(t["packet_bytes"]), float(t["rate_mbps_per_user"]), int(t["users"])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed slice entry: {exc}", ["slices"]) from exc


def dump_config(slices, topology: Topology | None = None) -> str:
    doc = {"table_version": WORKLOAD_TABLE_VERSION, "slices": [slice_to_dict(s) for s in slices]}
    if topology is not None:
        doc["topology"] = topology.to_dict()
    return yaml.safe_dump(doc, sort_keys=False)


def save_config(path, slices, topology: Topology | None = None) -> None:
    Path(path).write_text(dump_config(slices, topology))


def load_config(path) -> tuple[list[SliceSpec], Topology | None]:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or "slices" not in doc:
        raise ConfigError(f"{path}: expected a mapping with a 'slices' list", ["slices"])
    slices = [slice_from_dict(d) for d in doc["slices"]]
    topo = Topology.from_dict(doc["topology"]) if "topology" in doc else None
    return slices, topo
