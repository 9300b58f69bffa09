"""Egress pipeline of one switch: change-triggered telemetry insertion with miss recovery."""

from __future__ import annotations

import logging
from collections import deque

from slicetel.dataplane.buckets import BucketArrays, BucketEntry
from slicetel.dataplane.header import HopMetadata, MetricReport, TelemetryHeader, header_size
from slicetel.domain.types import ALL_METRICS
from slicetel.errors import HeaderOverflowError

log = logging.getLogger(__name__)

LAT, JIT, LOSS = 0, 1, 2
MISS_BIT = 1 << 3
EVENT_NAMES = ("inserted", "skipped", "miss")
DEFAULT_HEADROOM_BYTES = 64
DEFAULT_RESERVOIR = 1024


class Packet:
    """In-flight packet: identifiers plus the mutable telemetry header.

    ``e`` and ``aux`` hold the conditional part per metric (``None`` when
    absent); ``nodes`` is the per-hop metadata appended so far.
    """

    __slots__ = ("slice_id", "path_id", "seq", "hop", "e", "aux", "nodes")

    def __init__(self, slice_id: int, path_id: int, seq: int = 0):
        self.slice_id = slice_id
        self.path_id = path_id
        self.seq = seq  # packets the source has sent on this path, this one included
        self.hop = 0
        self.e = [None, None, None]
        self.aux = [None, None, None]
        self.nodes = []

    def header(self) -> TelemetryHeader:
        reports = {}
        for m in ALL_METRICS:
            if self.e[m.index] is not None:
                reports[m] = MetricReport(self.e[m.index], self.aux[m.index])
        return TelemetryHeader(tuple(HopMetadata(n) for n in self.nodes), reports)

    def n_fields(self) -> int:
        return sum(v is not None for v in self.e) + sum(v is not None for v in self.aux)


class IdealTable:
    """Collision-free stand-in for :class:`BucketArrays` (reference for recovery overhead)."""

    def __init__(self):
        self._entries: dict = {}

    @property
    def occupancy(self) -> int:
        return len(self._entries)

    def lookup(self, key):
        return self._entries.get(key)

    def insert(self, key):
        entry = self._entries[key] = BucketEntry(key)
        return entry, None

    def entries(self):
        return iter(self._entries.values())


class Switch:
    """State and egress processing of one switch.

    Thresholds are indexed per slice as ``[latency, jitter, loss]`` in
    data-plane units (ns, ns, packets); ``None`` leaves a metric unmonitored.
    """

    def __init__(
        self,
        node_id: int,
        table=None,
        *,
        headroom_bytes: int = DEFAULT_HEADROOM_BYTES,
        reservoir_size: int = DEFAULT_RESERVOIR,
        collect_samples: bool = True,
    ):
        if not 0 <= node_id < 1024:
            raise ValueError(f"node id {node_id} does not fit 10 bits")
        self.node_id = node_id
        self.table = table if table is not None else BucketArrays()
        self.headroom_bytes = headroom_bytes
        self.reservoir_size = reservoir_size
        self.collect_samples = collect_samples
        self.thresholds: dict = {}
        self.paths: dict = {}  # path_id -> (hops, ports, position of this switch)
        self.counters: dict = {}  # forwarded packets per key
        self.reservoirs: dict = {}
        self.outbox: list = []  # (upstream node, upstream key) notifications awaiting delivery
        self._seen_keys: set = set()
        self.lookups = 0
        self.misses = 0
        self.cold_misses = 0
        self.evictions = 0
        self.notifications_sent = 0
        self.forced = 0
        self.overflows = 0
        self.insertions = [0, 0, 0]

    # configuration -------------------------------------------------------

    def register_path(self, path) -> None:
        pos = path.hops.index(self.node_id)
        self.paths[path.path_id] = (tuple(path.hops), tuple(path.ports), pos)

    def deploy(self, thresholds: dict) -> None:
        """Replace every threshold at once; called only between packet events."""
        self.thresholds = {s: list(v) for s, v in thresholds.items()}

    def key_for(self, slice_id: int, path_id: int):
        hops, ports, pos = self.paths[path_id]
        return (slice_id, path_id, ports[pos])

    # packet path -----------------------------------------------------------

    def process(self, pkt: Packet, hop_latency: int) -> int:
        """Run the egress pipeline for ``pkt``; returns an insertion/miss bitmask.

        Bit ``m`` is set when metric ``m`` was inserted, :data:`MISS_BIT` on a
        table miss. Raises :class:`HeaderOverflowError` (leaving the packet
        and the entry untouched) if insertion would exceed the headroom.
        """
        hops, ports, pos = self.paths[pkt.path_id]
        key = (pkt.slice_id, pkt.path_id, ports[pos])
        self.lookups += 1
        entry = self.table.lookup(key)
        mask = 0
        if entry is None:
            mask = MISS_BIT
            self.misses += 1
            if key not in self._seen_keys:
                self._seen_keys.add(key)
                self.cold_misses += 1
            entry, evicted = self.table.insert(key)
            if evicted is not None:
                self.evictions += 1
                self._notify_upstream(evicted)
            if pos > 0:
                self._notify_upstream(key)
            force = True
        else:
            force = entry.f_tm

        count = self.counters.get(key, 0) + 1
        th = self.thresholds.get(pkt.slice_id)
        if th is None:
            self.counters[key] = count
            entry.f_tm = False
            pkt.e = [None, None, None]
            pkt.aux = [None, None, None]
            pkt.nodes.append(self.node_id)
            pkt.hop += 1
            return mask

        seen = entry.seen
        e_new = [None, None, None]
        l_loss = entry.loss_hop
        n_fields = 0
        for m in (LAT, JIT, LOSS):
            delta = th[m]
            if delta is None:
                continue
            if m == LAT:
                L = hop_latency
            elif m == JIT:
                L = hop_latency - entry.v_aux[JIT] if seen else 0
            elif pos == 0:
                L = l_loss = pkt.seq - count
            else:
                up = pkt.aux[LOSS]
                if up is not None:
                    l_loss = up - count
                L = l_loss
            if pos == 0:
                e_prev = 0
            else:
                e_prev = pkt.e[m]
                if e_prev is None:
                    e_prev = entry.e_prev[m]
            E = e_prev + L
            e_new[m] = E
            if force or abs(E - entry.e_rep[m]) >= delta:
                mask |= 1 << m
                n_fields += 2 if m == LOSS else 1

        if n_fields and header_size(pos + 1, 0) + 4 * n_fields > self.headroom_bytes:
            self.overflows += 1
            raise HeaderOverflowError(
                f"switch {self.node_id}: header would reach "
                f"{header_size(pos + 1, 0) + 4 * n_fields} B, headroom {self.headroom_bytes} B"
            )

        # commit
        if force:
            self.forced += 1
            entry.f_tm = False
        self.counters[key] = count
        entry.loss_hop = l_loss
        entry.v_aux[JIT] = hop_latency
        entry.v_aux[LOSS] = count
        collect = self.collect_samples and seen
        for m in (LAT, JIT, LOSS):
            E = e_new[m]
            if E is None:
                pkt.e[m] = None
                pkt.aux[m] = None
                continue
            if pos > 0 and pkt.e[m] is not None:
                entry.e_prev[m] = pkt.e[m]
            if collect:
                res = self.reservoirs.get((key, m))
                if res is None:
                    res = self.reservoirs[(key, m)] = deque(maxlen=self.reservoir_size)
                res.append(E - entry.e_last[m])
            entry.e_last[m] = E
            if mask >> m & 1:
                entry.e_rep[m] = E
                self.insertions[m] += 1
                pkt.e[m] = E
                pkt.aux[m] = count if m == LOSS else None
            else:
                pkt.e[m] = None  # stale upstream fields never travel past a skipping hop
                pkt.aux[m] = None
        entry.seen = True
        pkt.nodes.append(self.node_id)
        pkt.hop += 1
        return mask

    def process_packet(self, pkt: Packet, ingress_ts: int, egress_ts: int):
        """Instrumented wrapper: returns the packet and a list of (event, metric) tuples."""
        mask = self.process(pkt, egress_ts - ingress_ts)
        events = []
        if mask & MISS_BIT:
            events.append(("miss", None))
        th = self.thresholds.get(pkt.slice_id) or [None, None, None]
        for m in ALL_METRICS:
            if th[m.index] is None:
                continue
            events.append(("inserted" if mask >> m.index & 1 else "skipped", m))
        return pkt, events

    # miss recovery -----------------------------------------------------------

    def _notify_upstream(self, key) -> None:
        info = self.paths.get(key[1])
        if info is None:
            log.warning("switch %d: miss notification for unknown path %d dropped", self.node_id, key[1])
            return
        hops, ports, pos = info
        if pos == 0:
            return
        self.outbox.append((hops[pos - 1], (key[0], key[1], ports[pos - 1])))
        self.notifications_sent += 1

    def handle_miss(self, key):
        """Queue a notification to the upstream switch of ``key``; returns it (or ``None`` at ingress)."""
        before = len(self.outbox)
        self._notify_upstream(key)
        return self.outbox[-1] if len(self.outbox) > before else None

    def receive_notification(self, key) -> None:
        """Force full telemetry on the next packet of ``key``, recursing upstream on a miss."""
        entry = self.table.lookup(key)
        if entry is not None:
            entry.f_tm = True
            return
        info = self.paths.get(key[1])
        if info is None:
            log.warning("switch %d: notification for unknown path %d dropped", self.node_id, key[1])
            return
        if info[2] == 0:
            entry, evicted = self.table.insert(key)
            entry.f_tm = True
            if evicted is not None:
                self.evictions += 1
            return
        self._notify_upstream(key)

    def drain_outbox(self) -> list:
        out, self.outbox = self.outbox, []
        return out

    # export ----------------------------------------------------------------

    def export_samples(self, clear: bool = True) -> dict:
        """Difference reservoirs keyed by (slice_id, path_id, hop position, metric)."""
        out = {}
        for (key, m), res in self.reservoirs.items():
            if res:
                pos = self.paths[key[1]][2]
                out[(key[0], key[1], pos, ALL_METRICS[m])] = list(res)
        if clear:
            for res in self.reservoirs.values():
                res.clear()
        return out

    def lookup(self, key) -> BucketEntry | None:
        return self.table.lookup(key)


def thresholds_vector(per_metric: dict) -> list:
    """``{MetricKind: Δ}`` to the ``[latency, jitter, loss]`` list a switch stores."""
    return [per_metric.get(m) for m in ALL_METRICS]

