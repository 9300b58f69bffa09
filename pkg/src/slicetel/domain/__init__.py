from slicetel.domain.topology import (
    ACCESS,
    AGGREGATION,
    CORE,
    HOST,
    Link,
    Topology,
    calibrate_capacities,
    offered_load,
    three_tier,
)
from slicetel.domain.types import (
    ALL_METRICS,
    ALL_SLICE_TYPES,
    DEFAULT_TOLERANCE_FRACTION,
    CandidateGrid,
    MetricKind,
    PathSpec,
    SliceSpec,
    SliceType,
    TrafficProfile,
    from_dataplane_units,
    to_dataplane_units,
    tolerance_of,
)
from slicetel.domain.workload import MIXES, WORKLOAD_TABLE, make_workload, type_counts, within_table
from slicetel.domain.config import dump_config, load_config, save_config

__all__ = [
    "ACCESS",
    "AGGREGATION",
    "CORE",
    "HOST",
    "ALL_METRICS",
    "ALL_SLICE_TYPES",
    "DEFAULT_TOLERANCE_FRACTION",
    "CandidateGrid",
    "Link",
    "MIXES",
    "MetricKind",
    "PathSpec",
    "SliceSpec",
    "SliceType",
    "Topology",
    "TrafficProfile",
    "WORKLOAD_TABLE",
    "calibrate_capacities",
    "dump_config",
    "from_dataplane_units",
    "load_config",
    "make_workload",
    "offered_load",
    "save_config",
    "three_tier",
    "to_dataplane_units",
    "tolerance_of",
    "type_counts",
    "within_table",
]
