"""Telemetry replay over a forwarding trace: switches, miss recovery, epochs, collector."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from slicetel.dataplane.buckets import BucketArrays
from slicetel.dataplane.hashing import mix64
from slicetel.dataplane.header import metadata_bytes
from slicetel.dataplane.switch import MISS_BIT, IdealTable, Packet, Switch
from slicetel.errors import HeaderOverflowError
from slicetel.netsim.forwarding import Trace
from slicetel.netsim.traffic import NS_PER_S

SHIM_BITS, HOP_BITS, FIELD_BITS = 24, 13, 32
_FIELDS = [0] * 8
for _m in range(8):
    _FIELDS[_m] = (_m & 1) + (_m >> 1 & 1) + 2 * (_m >> 2 & 1)  # loss carries its counter as well


@dataclass
class ReplayConfig:
    tau_s: float = 5.0
    d: int = 2
    w: int = 4096
    hash_seed: int = 0
    ideal_table: bool = False
    headroom_bytes: int = 64
    reservoir_size: int = 1024
    notification_bits: int = 64
    collect_samples: bool = True


@dataclass
class Replay:
    """Per-packet telemetry outcome of one policy over one trace."""

    estimate: np.ndarray  # (N, 3) collector estimate when the packet left the network; NaN if none yet
    last_hop_e: np.ndarray  # (N, 3) E_curr computed at the last hop (NaN if unmonitored or dropped)
    ev_packet: np.ndarray  # hop events in processing order
    ev_hop: np.ndarray
    ev_time: np.ndarray
    ev_mask: np.ndarray
    notifications: list  # delivery times (ns)
    switch_stats: dict
    decisions: list = field(default_factory=list)
    overflows: int = 0


class StaticPolicy:
    """Fixed thresholds for the whole run (slice_id -> [latency, jitter, loss] in data-plane units)."""

    name = "static"

    def __init__(self, thresholds: dict):
        self.fixed = {s: list(v) for s, v in thresholds.items()}

    def initial(self) -> dict:
        return self.fixed

    def on_epoch(self, epoch: int, samples: dict):
        return None


def hop_events(trace: Trace):
    """(packet, hop, egress time) of every processed hop, in processing order."""
    p_idx, h_idx = np.nonzero(trace.dep >= 0)
    t = trace.dep[p_idx, h_idx]
    order = np.lexsort((h_idx, p_idx, t))
    return p_idx[order], h_idx[order], t[order]


def replay(trace: Trace, policy, cfg: ReplayConfig | None = None, events=None) -> Replay:
    """Run the change-triggered data plane over ``trace`` under ``policy``.

    ``policy`` provides ``initial()`` and ``on_epoch(epoch, samples)``
    returning per-slice threshold vectors (or ``None`` to keep the current
    ones); thresholds swap at epoch boundaries, between packet events.
    """
    cfg = cfg or ReplayConfig()
    p_ev, h_ev, t_ev = events if events is not None else hop_events(trace)
    n = trace.n_packets

    switches: dict = {}
    for _, path in trace.paths:
        for node in path.hops:
            if node not in switches:
                table = IdealTable() if cfg.ideal_table else BucketArrays(cfg.d, cfg.w, mix64(cfg.hash_seed * 1024 + node))
                switches[node] = Switch(
                    node,
                    table,
                    headroom_bytes=cfg.headroom_bytes,
                    reservoir_size=cfg.reservoir_size,
                    collect_samples=cfg.collect_samples,
                )
            switches[node].register_path(path)
    sw_list = list(switches.values())

    def deploy(th):
        for sw in sw_list:
            sw.deploy(th)

    deploy(policy.initial())

    res = trace.residence()
    res_l = res.tolist()
    pkt_slice = trace.pkt_slice.tolist()
    pkt_path = trace.pkt_path.tolist()
    pkt_seq = trace.pkt_seq.tolist()
    path_nodes = [p.hops for _, p in trace.paths]
    path_ids = [p.path_id for _, p in trace.paths]
    path_len = [len(h) for h in path_nodes]
    prop = trace.prop_delay
    node_sw = [[switches[x] for x in hops] for hops in path_nodes]
    g_of = {pid: g for g, pid in enumerate(path_ids)}

    def link_prop(key, upstream_node):
        g = g_of[key[1]]
        return prop[g][path_nodes[g].index(upstream_node)]

    estimate = np.full((n, 3), np.nan)
    last_e = np.full((n, 3), np.nan)
    report = [[None, None, None] for _ in trace.paths]
    masks = np.zeros(len(p_ev), dtype=np.int64)
    live: dict = {}
    notif_heap: list = []
    notif_seq = 0
    notif_times: list = []
    overflows = 0
    tau = int(round(cfg.tau_s * NS_PER_S))
    next_epoch = tau
    epoch = 0

    p_list, h_list, t_list = p_ev.tolist(), h_ev.tolist(), t_ev.tolist()
    for i in range(len(p_list)):
        p, h, t = p_list[i], h_list[i], t_list[i]
        while next_epoch <= t or (notif_heap and notif_heap[0][0] <= t):
            if notif_heap and notif_heap[0][0] <= min(t, next_epoch):
                nt, _, node, key = heapq.heappop(notif_heap)
                sw = switches[node]
                sw.receive_notification(key)
                for dst, k2 in sw.drain_outbox():
                    notif_seq += 1
                    heapq.heappush(notif_heap, (nt + link_prop(k2, dst), notif_seq, dst, k2))
                    notif_times.append(nt)
                continue
            epoch += 1
            samples = {}
            for sw in sw_list:
                samples.update(sw.export_samples())
            new = policy.on_epoch(epoch, samples)
            if new is not None:
                deploy(new)
            next_epoch += tau

        g = pkt_path[p]
        if h == 0:
            pkt = Packet(pkt_slice[p], path_ids[g], pkt_seq[p])
            live[p] = pkt
        else:
            pkt = live[p]
        sw = node_sw[g][h]
        try:
            mask = sw.process(pkt, res_l[p][h])
        except HeaderOverflowError:
            overflows += 1
            mask = 0
            pkt.e = [None, None, None]
            pkt.aux = [None, None, None]
            pkt.nodes.append(sw.node_id)
            pkt.hop += 1
        masks[i] = mask
        if sw.outbox:
            for dst, key in sw.drain_outbox():
                notif_seq += 1
                heapq.heappush(notif_heap, (t + link_prop(key, dst), notif_seq, dst, key))
                notif_times.append(t)
        if h == path_len[g] - 1:
            del live[p]
            rep = report[g]
            e = pkt.e
            for m in (0, 1, 2):
                if e[m] is not None:
                    rep[m] = e[m]
            estimate[p] = [np.nan if v is None else v for v in rep]
            entry = sw.lookup((pkt.slice_id, pkt.path_id, sw.paths[pkt.path_id][1][h]))
            if entry is not None:
                th = sw.thresholds.get(pkt.slice_id) or (None, None, None)
                last_e[p] = [entry.e_last[m] if th[m] is not None else np.nan for m in (0, 1, 2)]

    stats = {
        node: {
            "lookups": sw.lookups,
            "misses": sw.misses,
            "cold_misses": sw.cold_misses,
            "evictions": sw.evictions,
            "notifications": sw.notifications_sent,
            "forced": sw.forced,
            "insertions": list(sw.insertions),
            "occupancy": sw.table.occupancy,
        }
        for node, sw in switches.items()
    }
    decisions = list(getattr(policy, "decisions", []))
    return Replay(estimate, last_e, p_ev, h_ev, t_ev, masks, notif_times, stats, decisions, overflows)


def header_bits_per_event(h_ev: np.ndarray, masks: np.ndarray):
    """(model bits, wire bits) of the header each hop event leaves with.

    Model bits charge shim + one hop of metadata + inserted fields per hop;
    wire bits count the byte-padded header actually carried on the next link.
    """
    fields = np.asarray(_FIELDS)[masks & 7]
    model = SHIM_BITS + HOP_BITS + FIELD_BITS * fields
    meta = np.array([metadata_bytes(k) for k in range(int(h_ev.max(initial=0)) + 2)])
    wire = 8 * (3 + meta[h_ev + 1]) + FIELD_BITS * fields
    return model, wire
