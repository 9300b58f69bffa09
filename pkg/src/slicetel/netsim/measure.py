"""Ground truth, monitoring error and overhead accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from slicetel.domain.types import ALL_METRICS, ALL_SLICE_TYPES, SliceType
from slicetel.netsim.forwarding import Trace
from slicetel.netsim.replay import Replay, header_bits_per_event


def truth_values(trace: Trace) -> np.ndarray:
    """(N, 3) true latency (ns, sum of per-hop residence), jitter (ns) and loss (packets).

    Jitter is the latency change from the previous delivered packet on the
    same path; loss counts earlier packets of the path that were dropped.
    Rows of dropped packets are NaN.
    """
    n = trace.n_packets
    out = np.full((n, 3), np.nan)
    res = trace.residence()
    delivered = trace.drop_hop < 0
    lat = np.where(res >= 0, res, 0).sum(axis=1).astype(float)
    out[delivered, 0] = lat[delivered]
    for g in range(len(trace.paths)):
        idx = np.flatnonzero(trace.pkt_path == g)
        if idx.size == 0:
            continue
        d = idx[delivered[idx]]
        if d.size:
            # packets leave the network in seq order on a path (FIFO per class and port)
            jit = np.diff(lat[d], prepend=lat[d[0]])
            out[d, 1] = jit
            out[d, 2] = trace.pkt_seq[d] - np.arange(1, d.size + 1)
    return out


@dataclass
class ResultSet:
    """Aggregated run metrics; ``rows`` feed the results CSV."""

    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def row(self, scope: str, key, metric: str) -> dict | None:
        for r in self.rows:
            if r["scope"] == scope and str(r["key"]) == str(key) and r["metric"] == metric:
                return r
        return None


RESULT_COLUMNS = [
    "scope",
    "key",
    "metric",
    "packets",
    "violations",
    "violation_fraction",
    "mean_abs_error",
    "bits_per_packet",
    "overhead_ratio",
]


def _frac(num, den):
    return num / den if den else math.nan


def measure(
    trace: Trace,
    rep: Replay,
    tolerances: dict,
    *,
    warmup_ns: int = 0,
    notification_bits: int = 64,
    truth: np.ndarray | None = None,
) -> ResultSet:
    """Violation fractions per (slice, metric), per slice type and overall, plus overhead.

    ``tolerances`` maps slice_id to ``[ε_latency, ε_jitter, ε_loss]`` in
    data-plane units (``None``/NaN for unmonitored metrics). A packet whose
    collector estimate is missing counts as a violation.
    """
    truth = truth_values(trace) if truth is None else truth
    n = trace.n_packets
    window = trace.pkt_t >= warmup_ns
    delivered = trace.drop_hop < 0
    eps = np.full((n, 3), np.nan)
    slice_ids = sorted({s.slice_id for s in trace.slices})
    for sid in slice_ids:
        vec = [np.nan if v is None else float(v) for v in tolerances.get(sid, [None] * 3)]
        eps[trace.pkt_slice == sid] = vec
    err = np.abs(rep.estimate - truth)
    monitored = ~np.isnan(eps) & (window & delivered)[:, None]
    viol = monitored & ~(err <= eps)  # NaN error (no report yet) counts as violation

    model_bits, wire_bits = header_bits_per_event(rep.ev_hop, rep.ev_mask)
    ev_in = window[rep.ev_packet]
    ev_slice = trace.pkt_slice[rep.ev_packet]
    payload_bits = 8 * trace.pkt_size[rep.ev_packet]
    types = {s.slice_id: SliceType(s.slice_type) for s in trace.slices}

    def overhead(sel_packets, sel_events):
        pk = int(sel_packets.sum())
        mb = float(model_bits[sel_events].sum())
        wb = float(wire_bits[sel_events].sum())
        pb = float(payload_bits[sel_events].sum())
        return _frac(mb, pk), _frac(wb, wb + pb)

    rows = []

    def add(scope, key, sel_pk, sel_ev):
        bpp, ratio = overhead(sel_pk & window, sel_ev & ev_in)
        tot_m = int(monitored[sel_pk].sum())
        tot_v = int(viol[sel_pk].sum())
        e_all = err[sel_pk][monitored[sel_pk]]
        rows.append({
            "scope": scope, "key": key, "metric": "all", "packets": int((sel_pk & window & delivered).sum()),
            "violations": tot_v, "violation_fraction": _frac(tot_v, tot_m),
            "mean_abs_error": float(np.nanmean(e_all)) if e_all.size and not np.all(np.isnan(e_all)) else math.nan,
            "bits_per_packet": bpp, "overhead_ratio": ratio,
        })
        for m in ALL_METRICS:
            mon = monitored[sel_pk, m.index]
            k = int(mon.sum())
            v = int(viol[sel_pk, m.index].sum())
            e = err[sel_pk, m.index][mon]
            rows.append({
                "scope": scope, "key": key, "metric": m.value, "packets": k, "violations": v,
                "violation_fraction": _frac(v, k),
                "mean_abs_error": float(np.nanmean(e)) if e.size and not np.all(np.isnan(e)) else math.nan,
                "bits_per_packet": math.nan, "overhead_ratio": math.nan,
            })

    all_pk = np.ones(n, dtype=bool)
    all_ev = np.ones(len(rep.ev_packet), dtype=bool)
    add("all", "all", all_pk, all_ev)
    for st in ALL_SLICE_TYPES:
        ids = [s for s in slice_ids if types[s] is st]
        if ids:
            add("type", st.value, np.isin(trace.pkt_slice, ids), np.isin(ev_slice, ids))
    for sid in slice_ids:
        add("slice", sid, trace.pkt_slice == sid, ev_slice == sid)

    lookups = sum(s["lookups"] for s in rep.switch_stats.values())
    misses = sum(s["misses"] for s in rep.switch_stats.values())
    cold = sum(s["cold_misses"] for s in rep.switch_stats.values())
    win_s = max(trace.duration_ns - warmup_ns, 1) / 1e9
    last_hops = rep.ev_hop == (trace.hop_count()[rep.ev_packet] - 1)
    reports = int(((rep.ev_mask & 7) > 0)[last_hops & ev_in].sum())
    n_win = int(window.sum())
    summary = {
        "packets": n_win,
        "delivered": int((window & delivered).sum()),
        "dropped": int((window & ~delivered).sum()),
        "bits_per_packet": rows[0]["bits_per_packet"],
        "overhead_ratio": rows[0]["overhead_ratio"],
        "violation_fraction": rows[0]["violation_fraction"],
        "miss_rate": _frac(misses, lookups),
        "steady_miss_rate": _frac(misses - cold, lookups),
        "notifications": len(rep.notifications),
        "recovery_bits_per_packet": _frac(len(rep.notifications) * notification_bits, max(n_win, 1)),
        "reports_per_s": reports / win_s,
        "overflows": rep.overflows,
        "saturated": bool(trace.saturated),
    }
    return ResultSet(rows, summary)


def p90_intervals(t_ns: np.ndarray, truth: np.ndarray, estimate: np.ndarray, interval_ns: int, start_ns: int = 0):
    """P90 of truth and estimate per interval: list of (interval start, truth P90, estimate P90)."""
    out = []
    if t_ns.size == 0:
        return out
    k = (t_ns - start_ns) // interval_ns
    for b in np.unique(k[k >= 0]):
        sel = k == b
        tv = truth[sel]
        ev = estimate[sel]
        ev = ev[~np.isnan(ev)]
        out.append((int(start_ns + b * interval_ns), float(np.percentile(tv, 90)),
                    float(np.percentile(ev, 90)) if ev.size else math.nan))
    return out


def insertion_rates(trace: Trace, rep: Replay, slice_id: int, metric_index: int, warmup_ns: int = 0) -> dict:
    """Measured β per (path_id, hop position): insertions / processed packets."""
    sel = (trace.pkt_slice[rep.ev_packet] == slice_id) & (trace.pkt_t[rep.ev_packet] >= warmup_ns)
    out = {}
    g = trace.pkt_path[rep.ev_packet]
    ins = (rep.ev_mask >> metric_index) & 1
    for gi in np.unique(g[sel]):
        pid = trace.paths[gi][1].path_id
        for h in np.unique(rep.ev_hop[sel & (g == gi)]):
            s = sel & (g == gi) & (rep.ev_hop == h)
            out[(pid, int(h))] = float(ins[s].mean())
    return out
