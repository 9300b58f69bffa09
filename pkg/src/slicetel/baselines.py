"""Comparison schemes: static thresholds, per-hop probabilistic sampling, per-hop histograms."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from slicetel.domain.types import NS_PER_MS, MetricKind
from slicetel.netsim.forwarding import Trace
from slicetel.netsim.measure import ResultSet, p90_intervals
from slicetel.netsim.sim import Prepared, RunOutput, run_scheme

HOP_FIXED_BITS = 24 + 13
VALUE_BITS = 32


def run_static(prep: Prepared, k) -> RunOutput:
    """Static thresholds: a scalar multiplier (slice-agnostic) or one per slice type (slice-aware)."""
    if isinstance(k, (list, tuple)):
        return run_scheme(prep, {"scheme": "aware", "k": list(k)})
    return run_scheme(prep, {"scheme": "agnostic", "k": float(k)})


# probabilistic per-hop sampling ------------------------------------------------


def sampling_probability(budget_bits: float, hops: int) -> float:
    """Per-hop write probability whose expected bits/packet matches ``budget_bits``."""
    q = (budget_bits - HOP_FIXED_BITS * hops) / (VALUE_BITS * hops)
    return float(min(1.0, max(0.0, q)))


def pint_reconstruct(residence: np.ndarray, sampled: np.ndarray) -> np.ndarray:
    """Sum of the most recently sampled value of every hop, in packet order.

    ``residence`` and ``sampled`` are (packets, hops) for one path, rows in
    the order packets reach the collector. NaN until every hop was sampled once.
    """
    n, H = residence.shape
    idx = np.arange(n)
    est = np.zeros(n)
    for h in range(H):
        last = np.maximum.accumulate(np.where(sampled[:, h], idx, -1))
        seen = last >= 0
        col = np.full(n, np.nan)
        col[seen] = residence[last[seen], h]
        est += col
    return est


def pint_estimates(trace: Trace, budget_bits: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Per-packet latency reconstruction and per-packet header bits under hop sampling."""
    rng = np.random.default_rng(seed)
    res = trace.residence().astype(float)
    est = np.full(trace.n_packets, np.nan)
    bits = np.zeros(trace.n_packets)
    delivered = trace.drop_hop < 0
    for g, (_, path) in enumerate(trace.paths):
        idx = np.flatnonzero((trace.pkt_path == g) & delivered)
        if idx.size == 0:
            continue
        H = len(path.hops)
        q = sampling_probability(budget_bits, H)
        order = idx[np.argsort(trace.dep[idx, H - 1], kind="stable")]
        sampled = rng.random((order.size, H)) < q
        est[order] = pint_reconstruct(res[order, :H], sampled)
        bits[order] = HOP_FIXED_BITS * H + VALUE_BITS * sampled.sum(axis=1)
    return est, bits


# per-hop histograms ---------------------------------------------------------------


def hop_histogram(values: np.ndarray, bins: int, upper: float) -> np.ndarray:
    """Counts over ``bins`` equal-width bins on ``[0, upper]``; values above clamp to the last bin."""
    width = upper / bins
    k = np.clip((np.asarray(values, dtype=float) // width).astype(np.int64), 0, bins - 1)
    return np.bincount(k, minlength=bins).astype(float)


def convolve_hops(histograms) -> np.ndarray:
    """Distribution of the summed bin index across hops (independent hops)."""
    dist = np.array([1.0])
    for hist in histograms:
        total = hist.sum()
        if total <= 0:
            return np.zeros(0)
        dist = np.convolve(dist, hist / total)
    return dist


def convolved_p90(histograms, width: float) -> float:
    """P90 of the end-to-end value; each hop value is represented by its bin midpoint."""
    dist = convolve_hops(histograms)
    if dist.size == 0:
        return math.nan
    k = int(np.searchsorted(np.cumsum(dist), 0.9 - 1e-12))
    return (k + len(histograms) / 2.0) * width


def sketch_p90_series(trace: Trace, slice_id: int, bins: int, export_ns: int, upper: float, start_ns: int = 0):
    """(interval start, sketch P90) for one slice; paths are pooled hop by hop position."""
    res = trace.residence().astype(float)
    sel = np.flatnonzero((trace.pkt_slice == slice_id) & (trace.drop_hop < 0))
    out = []
    if sel.size == 0:
        return out
    H = len(trace.paths[trace.pkt_path[sel[0]]][1].hops)
    t_exit = trace.dep[sel, H - 1]
    k = (t_exit - start_ns) // export_ns
    width = upper / bins
    for b in np.unique(k[k >= 0]):
        rows = sel[k == b]
        hists = [hop_histogram(res[rows, h], bins, upper) for h in range(H)]
        out.append((int(start_ns + b * export_ns), convolved_p90(hists, width)))
    return out


# trace transforms ----------------------------------------------------------------


def inject_anticorrelation(slice_id: int, hops=(0, 1), amplitude_ns: int = 50_000, period_ns: int = 20_000_000):
    """Trace transform: opposite square waves of ``amplitude_ns`` at two hops of one slice.

    Hop ``hops[0]`` gains ``A + A·s(t)`` and hop ``hops[1]`` gains
    ``A - A·s(t)`` with ``s(t) = ±1`` flipping every half period, so the
    end-to-end latency only shifts by the constant ``2A``.
    """

    def apply(trace: Trace) -> Trace:
        sel = np.flatnonzero(trace.pkt_slice == slice_id)
        if sel.size == 0:
            return trace
        a, b = hops
        sign = np.where((trace.arr[sel, a] // (period_ns // 2)) % 2 == 0, 1, -1)
        dep = trace.dep.copy()
        arr = trace.arr.copy()
        for h, s in ((a, sign), (b, -sign)):
            shift = (amplitude_ns + amplitude_ns * s).astype(np.int64)[:, None]
            # the extra residence delays every later hop too
            tail_dep = dep[sel, h:]
            dep[sel, h:] = np.where(tail_dep >= 0, tail_dep + shift, tail_dep)
            tail_arr = arr[sel, h + 1:]
            arr[sel, h + 1:] = np.where(tail_arr >= 0, tail_arr + shift, tail_arr)
        return replace(trace, dep=dep, arr=arr)

    return apply


def inject_hop_noise(slice_id: int, hop: int, scale_ns: float, start_ns: int = 0, seed: int = 0):
    """Trace transform: add |Laplace(0, scale)| extra residence at one hop after ``start_ns``."""

    def apply(trace: Trace) -> Trace:
        rng = np.random.default_rng(seed)
        sel = np.flatnonzero((trace.pkt_slice == slice_id) & (trace.arr[:, hop] >= start_ns) & (trace.dep[:, hop] >= 0))
        dep = trace.dep.copy()
        arr = trace.arr.copy()
        shift = np.abs(rng.laplace(0.0, scale_ns, sel.size)).astype(np.int64)[:, None]
        tail_dep = dep[sel, hop:]
        dep[sel, hop:] = np.where(tail_dep >= 0, tail_dep + shift, tail_dep)
        tail_arr = arr[sel, hop + 1:]
        arr[sel, hop + 1:] = np.where(tail_arr >= 0, tail_arr + shift, tail_arr)
        return replace(trace, dep=dep, arr=arr)

    return apply


# scheme runner -------------------------------------------------------------------


def run_baseline(prep: Prepared, scheme: dict, *, keep_replay: bool = False) -> RunOutput:
    """Latency-only evaluation of the sampling or histogram baseline on a prepared trace."""
    trace = prep.trace
    truth = prep.truth[:, 0]
    window = (trace.pkt_t >= prep.warmup_ns) & (trace.drop_hop < 0)
    eps = np.array([
        np.nan if prep.tolerances[int(s)][0] is None else prep.tolerances[int(s)][0] for s in trace.pkt_slice
    ])
    rows = []
    extra: dict = {}
    interval = int(scheme.get("export_ms", 500) * NS_PER_MS)
    if scheme["scheme"] == "pint":
        est, bits = pint_estimates(trace, float(scheme["budget_bits"]), scheme.get("seed", prep.cfg.seed))
        err = np.abs(est - truth)
        viol = window & ~np.isnan(eps) & ~(err <= eps)
        mon = window & ~np.isnan(eps)
        for key, sel in _scopes(prep):
            k = int((mon & sel).sum())
            rows.append(_row(key, k, int((viol & sel).sum()), err[mon & sel], float(bits[window & sel].mean()) if k else math.nan))
        extra["estimate"] = est
        extra["bits"] = bits
    else:
        bins = int(scheme.get("bins", 10))
        if bins < 2:
            raise ValueError("histogram baseline needs at least 2 bins")
        series = {}
        n_win = max(int(window.sum()), 1)
        sketch_bits = 0.0
        for s in prep.slices:
            alpha = s.sla_targets.get(MetricKind.LATENCY)
            if alpha is None:
                continue
            upper = 2 * alpha * NS_PER_MS
            series[s.slice_id] = sketch_p90_series(trace, s.slice_id, bins, interval, upper, prep.warmup_ns)
            H = len(s.paths[0].hops)
            sketch_bits += len(series[s.slice_id]) * H * bins * VALUE_BITS
        for key, sel in _scopes(prep):
            rows.append(_row(key, 0, 0, np.zeros(0), math.nan))
        extra["p90"] = series
        extra["export_bits_per_packet"] = sketch_bits / n_win
        rows[0]["bits_per_packet"] = extra["export_bits_per_packet"]
    result = ResultSet(rows, {"violation_fraction": rows[0]["violation_fraction"], "bits_per_packet": rows[0]["bits_per_packet"]})
    result.summary.update({k: v for k, v in extra.items() if k == "export_bits_per_packet"})
    out = RunOutput(scheme, result)
    out.replay = extra if keep_replay else None
    return out


def _scopes(prep: Prepared):
    trace = prep.trace
    yield ("all", "all"), np.ones(trace.n_packets, dtype=bool)
    types = sorted({s.slice_type for s in prep.slices}, key=lambda t: t.rank)
    for st in types:
        ids = [s.slice_id for s in prep.slices if s.slice_type is st]
        yield ("type", st.value), np.isin(trace.pkt_slice, ids)
    for s in prep.slices:
        yield ("slice", s.slice_id), trace.pkt_slice == s.slice_id


def _row(key, packets, violations, errors, bits):
    scope, k = key
    return {
        "scope": scope,
        "key": k,
        "metric": MetricKind.LATENCY.value,
        "packets": packets,
        "violations": violations,
        "violation_fraction": violations / packets if packets else math.nan,
        "mean_abs_error": float(np.nanmean(errors)) if errors.size and not np.all(np.isnan(errors)) else math.nan,
        "bits_per_packet": bits,
        "overhead_ratio": math.nan,
    }


def ct_p90_series(prep: Prepared, estimate: np.ndarray, slice_id: int, interval_ns: int):
    """(interval start, truth P90, estimate P90) for change-triggered latency estimates of one slice."""
    trace = prep.trace
    sel = np.flatnonzero((trace.pkt_slice == slice_id) & (trace.drop_hop < 0))
    if sel.size == 0:
        return []
    H = len(trace.paths[trace.pkt_path[sel[0]]][1].hops)
    t_exit = trace.dep[sel, H - 1]
    keep = t_exit >= prep.warmup_ns
    return p90_intervals(t_exit[keep], prep.truth[sel[keep], 0], estimate[sel[keep]], interval_ns, prep.warmup_ns)
