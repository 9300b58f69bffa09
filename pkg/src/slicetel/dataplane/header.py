"""Two-part telemetry header: fixed shim + per-hop metadata, then conditional reports.

Wire layout (big-endian, bit-packed):

    shim (24 bits)      version:8 | hop_count:10 | bitmap:6
    hop metadata        hop_count x (node_id:10 | flags:3), zero-padded to a byte
    conditional fields  32-bit words in bitmap order

Bitmap bits, most significant first: latency E, latency aux, jitter E,
jitter aux, loss E, loss aux.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from slicetel.domain.types import ALL_METRICS, MetricKind
from slicetel.errors import HeaderDecodeError

SHIM_BITS = 24
HOP_BITS = 13
FIELD_BITS = 32
NODE_BITS = 10
FLAG_BITS = 3
HEADER_VERSION = 1
MAX_HOPS = (1 << 10) - 1

_FIELD_MASK = (1 << FIELD_BITS) - 1


@dataclass(frozen=True)
class HopMetadata:
    node_id: int
    flags: int = 0  # anomaly flags, always zero here


@dataclass(frozen=True)
class MetricReport:
    e_curr: int
    v_aux: int | None = None


@dataclass(frozen=True)
class TelemetryHeader:
    hops: tuple[HopMetadata, ...]
    reports: dict = field(default_factory=dict)  # MetricKind -> MetricReport
    version: int = HEADER_VERSION

    @property
    def hop_count(self) -> int:
        return len(self.hops)

    @property
    def bitmap(self) -> int:
        return bitmap_of(self.reports)

    def size_bytes(self) -> int:
        return header_size(self.hop_count, self.bitmap)


def bitmap_of(reports) -> int:
    bits = 0
    for m in ALL_METRICS:
        rep = reports.get(m)
        if rep is None:
            continue
        shift = 4 - 2 * m.index
        bits |= 1 << (shift + 1)
        if rep.v_aux is not None:
            bits |= 1 << shift
    return bits


def _bitmap_fields(bitmap: int):
    """(metric, is_aux) for each set bitmap bit in wire order."""
    out = []
    for m in ALL_METRICS:
        shift = 4 - 2 * m.index
        e_bit = bitmap >> (shift + 1) & 1
        aux_bit = bitmap >> shift & 1
        if aux_bit and not e_bit:
            raise HeaderDecodeError(f"bitmap {bitmap:06b}: aux bit for {m.value} without its value bit")
        if e_bit:
            out.append((m, False))
        if aux_bit:
            out.append((m, True))
    return out


def metadata_bytes(hop_count: int) -> int:
    return (HOP_BITS * hop_count + 7) // 8


def header_size(hop_count: int, bitmap: int) -> int:
    """Encoded size in bytes for a header with ``hop_count`` hops and the given bitmap."""
    return SHIM_BITS // 8 + metadata_bytes(hop_count) + 4 * bin(bitmap).count("1")


def max_header_size(hop_count: int, n_metrics: int) -> int:
    """Worst case: every metric reported together with its auxiliary value."""
    return SHIM_BITS // 8 + metadata_bytes(hop_count) + 8 * n_metrics


def header_bits(hop_count: int, n_fields: int) -> int:
    """Unpadded header bits, as counted by the overhead model."""
    return SHIM_BITS + HOP_BITS * hop_count + FIELD_BITS * n_fields


def _to_word(value: int, signed: bool, what: str) -> int:
    value = int(value)
    if signed:
        if not -(1 << 31) <= value < 1 << 31:
            raise ValueError(f"{what}={value} does not fit a signed 32-bit field")
        return value & _FIELD_MASK
    if not 0 <= value <= _FIELD_MASK:
        raise ValueError(f"{what}={value} does not fit an unsigned 32-bit field")
    return value


def _from_word(word: int, signed: bool) -> int:
    if signed and word >> 31:
        return word - (1 << 32)
    return word


def encode_header(h: TelemetryHeader) -> bytes:
    H = h.hop_count
    if not 1 <= H <= MAX_HOPS:
        raise ValueError(f"hop count {H} outside [1, {MAX_HOPS}]")
    if not 0 <= h.version < 256:
        raise ValueError("version must fit 8 bits")
    bitmap = h.bitmap
    acc = (h.version << 16) | (H << 6) | bitmap
    out = bytearray(acc.to_bytes(3, "big"))

    meta = 0
    for hop in h.hops:
        if not 0 <= hop.node_id < 1 << NODE_BITS or not 0 <= hop.flags < 1 << FLAG_BITS:
            raise ValueError(f"hop metadata out of range: {hop}")
        meta = (meta << HOP_BITS) | (hop.node_id << FLAG_BITS) | hop.flags
    nbytes = metadata_bytes(H)
    meta <<= 8 * nbytes - HOP_BITS * H
    out += meta.to_bytes(nbytes, "big")

    for m, is_aux in _bitmap_fields(bitmap):
        rep = h.reports[m]
        if is_aux:
            out += _to_word(rep.v_aux, False, f"{m.value} aux").to_bytes(4, "big")
        else:
            out += _to_word(rep.e_curr, m.signed, f"{m.value} E").to_bytes(4, "big")
    return bytes(out)


def decode_header(data: bytes, hop_count: int | None = None, bitmap: int | None = None) -> TelemetryHeader:
    """Inverse of :func:`encode_header`; optional ``hop_count``/``bitmap`` are cross-checked."""
    if len(data) < 3:
        raise HeaderDecodeError(f"header of {len(data)} bytes is shorter than the shim")
    shim = int.from_bytes(data[:3], "big")
    version, H, bm = shim >> 16, (shim >> 6) & MAX_HOPS, shim & 0x3F
    if hop_count is not None and hop_count != H:
        raise HeaderDecodeError(f"hop count {H} in shim, expected {hop_count}")
    if bitmap is not None and bitmap != bm:
        raise HeaderDecodeError(f"bitmap {bm:06b} in shim, expected {bitmap:06b}")
    if H < 1:
        raise HeaderDecodeError("header carries no hop metadata")
    fields = _bitmap_fields(bm)
    expected = header_size(H, bm)
    if len(data) != expected:
        raise HeaderDecodeError(f"length {len(data)} does not match {expected} implied by the shim")

    nbytes = metadata_bytes(H)
    meta = int.from_bytes(data[3:3 + nbytes], "big")
    pad = 8 * nbytes - HOP_BITS * H
    if meta & ((1 << pad) - 1):
        raise HeaderDecodeError("non-zero padding after hop metadata")
    meta >>= pad
    hops = []
    for i in range(H):
        word = (meta >> (HOP_BITS * (H - 1 - i))) & ((1 << HOP_BITS) - 1)
        hops.append(HopMetadata(word >> FLAG_BITS, word & ((1 << FLAG_BITS) - 1)))

    values: dict = {}
    pos = 3 + nbytes
    for m, is_aux in fields:
        word = int.from_bytes(data[pos:pos + 4], "big")
        pos += 4
        e, aux = values.get(m, (None, None))
        if is_aux:
            aux = word
        else:
            e = _from_word(word, m.signed)
        values[m] = (e, aux)
    reports = {m: MetricReport(e, aux) for m, (e, aux) in values.items()}
    return TelemetryHeader(tuple(hops), reports, version)


def dump_header(h: TelemetryHeader) -> str:
    """Human-readable rendering used for golden-file comparisons."""
    lines = [f"version={h.version} hops={h.hop_count} bitmap={h.bitmap:06b} size={h.size_bytes()}B"]
    for i, hop in enumerate(h.hops):
        lines.append(f"  hop[{i}] node={hop.node_id} flags={hop.flags:03b}")
    for m in ALL_METRICS:
        rep = h.reports.get(m)
        if rep is None:
            continue
        aux = "-" if rep.v_aux is None else str(rep.v_aux)
        lines.append(f"  {m.value}: E={rep.e_curr} aux={aux}")
    return "\n".join(lines)


def reports_for(metrics, e_values, aux_values=None) -> dict:
    """Convenience builder: one report per metric, aux only where the metric carries one."""
    aux_values = aux_values or {}
    return {
        MetricKind(m): MetricReport(int(e_values[m]), aux_values.get(m) if MetricKind(m).carries_aux else None)
        for m in metrics
    }
