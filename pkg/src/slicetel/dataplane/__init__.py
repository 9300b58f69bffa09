from slicetel.dataplane.buckets import BucketArrays, BucketEntry
from slicetel.dataplane.hashing import HashFamily, mix64, pack_key
from slicetel.dataplane.header import (
    HopMetadata,
    MetricReport,
    TelemetryHeader,
    decode_header,
    dump_header,
    encode_header,
    header_bits,
    header_size,
    max_header_size,
)
from slicetel.dataplane.switch import MISS_BIT, IdealTable, Packet, Switch, thresholds_vector

__all__ = [
    "BucketArrays",
    "BucketEntry",
    "HashFamily",
    "HopMetadata",
    "IdealTable",
    "MISS_BIT",
    "MetricReport",
    "Packet",
    "Switch",
    "TelemetryHeader",
    "decode_header",
    "dump_header",
    "encode_header",
    "header_bits",
    "header_size",
    "max_header_size",
    "mix64",
    "pack_key",
    "thresholds_vector",
]
