"""Packet-level forwarding: per-port WRR over slice classes with a shared finite buffer."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from slicetel.dataplane.header import metadata_bytes
from slicetel.domain.topology import Topology
from slicetel.domain.types import SliceType
from slicetel.netsim.traffic import NS_PER_S, OnOff, gen_traffic

DEPARTURE, ARRIVAL = 0, 1  # same-time tie-break: free the port before queueing new arrivals
DEFAULT_WRR = (4, 2, 1)
DEFAULT_BUFFER_BYTES = 22_000_000
DEFAULT_PROCESSING_NS = 1_000


@dataclass
class ForwardingConfig:
    scale: float = 100.0  # capacities and rates divided, processing delay multiplied
    wrr_weights: tuple = DEFAULT_WRR
    buffer_bytes: float = DEFAULT_BUFFER_BYTES  # per port, before scaling
    processing_ns: int = DEFAULT_PROCESSING_NS  # per switch, before scaling
    onoff: dict = field(default_factory=dict)  # slice_id -> OnOff


@dataclass
class Trace:
    """Ground truth of one forwarding run.

    ``arr[p, h]`` is when packet ``p`` entered hop ``h`` and ``dep[p, h]``
    when its last bit left that hop's egress port (-1 if never reached).
    """

    paths: list  # global path index -> (slice_id, PathSpec)
    slices: list
    pkt_slice: np.ndarray
    pkt_path: np.ndarray
    pkt_seq: np.ndarray
    pkt_t: np.ndarray
    pkt_size: np.ndarray
    arr: np.ndarray
    dep: np.ndarray
    drop_hop: np.ndarray
    duration_ns: int
    prop_delay: list  # per global path: propagation ns of the link after each hop
    port_stats: dict = field(default_factory=dict)
    saturated: bool = False

    @property
    def n_packets(self) -> int:
        return len(self.pkt_t)

    def residence(self) -> np.ndarray:
        """Per-hop latency (processing + queueing + transmission), -1 where not reached."""
        out = self.dep - self.arr
        out[self.dep < 0] = -1
        return out

    def hop_count(self) -> np.ndarray:
        return np.array([len(self.paths[g][1].hops) for g in self.pkt_path], dtype=np.int64)


def _merge_streams(slices, streams):
    paths = []
    path_base = {}
    for s in slices:
        path_base[s.slice_id] = len(paths)
        for p in s.paths:
            paths.append((s.slice_id, p))
    t = np.concatenate([st.t_ns for st in streams]) if streams else np.zeros(0, np.int64)
    sl = np.concatenate([np.full(len(st), st.slice_id) for st in streams]) if streams else np.zeros(0, np.int64)
    size = np.concatenate([st.size for st in streams]) if streams else np.zeros(0, np.int64)
    gpath = (
        np.concatenate([st.path + path_base[st.slice_id] for st in streams]) if streams else np.zeros(0, np.int64)
    )
    order = np.lexsort((sl, t))
    t, sl, size, gpath = t[order], sl[order], size[order], gpath[order]
    seq = np.zeros(len(t), dtype=np.int64)
    counts = np.zeros(len(paths), dtype=np.int64)
    for i, g in enumerate(gpath):
        counts[g] += 1
        seq[i] = counts[g]
    return paths, t, sl.astype(np.int64), size, gpath.astype(np.int64), seq


def forward(slices, topology: Topology, duration_s: float, seed, cfg: ForwardingConfig | None = None) -> Trace:
    """Generate every slice's traffic and push it through the network until it drains."""
    cfg = cfg or ForwardingConfig()
    ss = np.random.SeedSequence(seed)
    child = ss.spawn(len(slices))
    streams = [
        gen_traffic(s, child[i], duration_s, scale=cfg.scale, onoff=cfg.onoff.get(s.slice_id))
        for i, s in enumerate(slices)
    ]
    paths, t0, pkt_slice, size, gpath, seq = _merge_streams(slices, streams)
    n = len(t0)
    hmax = max((len(p.hops) for _, p in paths), default=1)
    arr = np.full((n, hmax), -1, dtype=np.int64)
    dep = np.full((n, hmax), -1, dtype=np.int64)
    drop_hop = np.full(n, -1, dtype=np.int64)

    type_of = {s.slice_id: SliceType(s.slice_type).rank for s in slices}
    pkt_class = [type_of[int(x)] for x in pkt_slice]
    size_l = size.tolist()
    gpath_l = gpath.tolist()

    # Port table: one entry per (node, port) used by some path.
    port_index: dict = {}
    port_cap: list = []
    port_prop: list = []
    path_ports: list = []
    path_prop: list = []
    for _, p in paths:
        ids, props = [], []
        for node, port in zip(p.hops, p.ports):
            key = (node, port)
            if key not in port_index:
                link = topology.link(node, port)
                port_index[key] = len(port_cap)
                port_cap.append(link.capacity_bps / cfg.scale)
                port_prop.append(int(link.prop_delay_ns))
            ids.append(port_index[key])
            props.append(port_prop[port_index[key]])
        path_ports.append(ids)
        path_prop.append(props)
    n_ports = len(port_cap)
    ns_per_bit = [NS_PER_S / c for c in port_cap]
    buffer_cap = cfg.buffer_bytes / cfg.scale
    proc = int(round(cfg.processing_ns * cfg.scale))
    weights = tuple(int(w) for w in cfg.wrr_weights)
    hdr_fixed = [3 + metadata_bytes(h + 1) for h in range(hmax)]

    queues = [[deque(), deque(), deque()] for _ in range(n_ports)]
    backlog = [0] * n_ports
    busy = [False] * n_ports
    cls_ptr = [0] * n_ports
    credit = [weights[0]] * n_ports
    max_backlog = [0] * n_ports
    served_bytes = [[0, 0, 0] for _ in range(n_ports)]
    busy_ns = [0] * n_ports

    heap = [(int(t0[i]) + proc, ARRIVAL, i, 0) for i in range(n)]
    heapq.heapify(heap)
    push, pop = heapq.heappush, heapq.heappop
    arr_l = arr  # numpy writes are the bottleneck only for large runs
    dep_l = dep

    def start(port, now):
        qs = queues[port]
        for _ in range(4):
            c = cls_ptr[port]
            if qs[c] and credit[port] > 0:
                credit[port] -= 1
                p, h = qs[c].popleft()
                wire = size_l[p] + hdr_fixed[h]
                tx = int(wire * 8 * ns_per_bit[port] + 0.5)
                busy[port] = True
                busy_ns[port] += tx
                served_bytes[port][c] += wire
                push(heap, (now + tx, DEPARTURE, p, h))
                return
            c = (c + 1) % 3
            cls_ptr[port] = c
            credit[port] = weights[c]
        busy[port] = False

    while heap:
        now, kind, p, h = pop(heap)
        g = gpath_l[p]
        port = path_ports[g][h]
        if kind == ARRIVAL:
            arr_l[p, h] = now - proc
            wire = size_l[p] + hdr_fixed[h]
            if backlog[port] + wire > buffer_cap:
                drop_hop[p] = h
                continue
            backlog[port] += wire
            if backlog[port] > max_backlog[port]:
                max_backlog[port] = backlog[port]
            queues[port][pkt_class[p]].append((p, h))
            if not busy[port]:
                start(port, now)
        else:
            dep_l[p, h] = now
            backlog[port] -= size_l[p] + hdr_fixed[h]
            if h + 1 < len(path_ports[g]):
                push(heap, (now + path_prop[g][h] + proc, ARRIVAL, p, h + 1))
            start(port, now)

    duration_ns = int(duration_s * NS_PER_S)
    last = int(dep.max()) if n else 0
    util = {k: busy_ns[i] / max(duration_ns, last, 1) for k, i in port_index.items()}
    stats = {
        k: {"utilization": util[k], "max_backlog_bytes": max_backlog[i], "served_bytes": list(served_bytes[i])}
        for k, i in port_index.items()
    }
    # Offered load at or above capacity means queues grow without bound.
    saturated = bool(n) and (max(util.values()) >= 0.98 or last > duration_ns * 1.5 + 1e9)
    return Trace(
        paths=paths,
        slices=list(slices),
        pkt_slice=pkt_slice,
        pkt_path=gpath,
        pkt_seq=seq,
        pkt_t=t0,
        pkt_size=size,
        arr=arr,
        dep=dep,
        drop_hop=drop_hop,
        duration_ns=duration_ns,
        prop_delay=path_prop,
        port_stats=stats,
        saturated=saturated,
    )
