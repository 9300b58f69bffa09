"""Difference-distribution fitting and the accuracy/overhead trade-off tables.

For a threshold Δ at one hop, β(Δ) is the long-run fraction of packets for
which the running sum of successive differences reaches Δ in magnitude
(the sum restarts from zero after each insertion). The error bound and the
expected header bits per packet follow from the per-hop β values.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from slicetel.domain.types import MetricKind
from slicetel.errors import InsufficientDataError

log = logging.getLogger(__name__)

DEFAULT_STEPS = 10_000
SHIM_BITS = 24
HOP_BITS = 13
REPORT_BITS = 32
MIN_HOP_SAMPLES = 16
_CHUNK = 256


@dataclass(frozen=True)
class DiffDistribution:
    """Laplace fit (location ``mu``, scale ``b``) of successive metric differences."""

    mu: float
    b: float
    n: int
    reservoir: np.ndarray = field(default=None, compare=False, repr=False)

    @property
    def constant(self) -> bool:
        return self.b == 0.0


def fit_differences(samples, reservoir_size: int = 1024) -> DiffDistribution:
    """Laplace maximum-likelihood fit: median location, mean absolute deviation scale."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientDataError("no difference samples to fit")
    mu = float(np.median(x))
    b = float(np.mean(np.abs(x - mu)))
    return DiffDistribution(mu, b, int(x.size), x[-reservoir_size:].copy())


def _series_seed(seed: int, *parts: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(int(p) & 0xFFFFFFFF for p in parts)])


def _draws(mu: float, b: float, n: int, seed) -> np.ndarray:
    if b == 0.0:
        return np.full(n, mu)
    return mu + b * np.random.default_rng(seed).laplace(0.0, 1.0, n)


def _simulate_resets(x: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Reset counts of |running sum| >= Δ for draws ``x`` (S, n) and thresholds (S, C)."""
    S, n = x.shape
    D = np.zeros_like(deltas, dtype=float)
    hits = np.zeros(deltas.shape, dtype=np.int64)
    for t in range(n):
        D += x[:, t:t + 1]
        hit = np.abs(D) >= deltas
        hits += hit
        D[hit] = 0.0
    return hits


def beta_of(dist: DiffDistribution, delta: float, n_steps: int = DEFAULT_STEPS, seed=0) -> float:
    """Insertion probability for threshold ``delta`` by direct simulation of the reset process."""
    if delta < 0:
        raise ValueError("threshold must be non-negative")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    x = _draws(dist.mu, dist.b, n_steps, seed)[None, :]
    return float(_simulate_resets(x, np.array([[float(delta)]]))[0, 0] / n_steps)


def beta_curves(dists, deltas, n_steps: int = DEFAULT_STEPS, seeds=None) -> np.ndarray:
    """β for every (distribution, candidate) pair, shape ``(len(dists), len(deltas))``.

    All candidates of one distribution share the same draws, and each row is
    projected onto non-increasing values in Δ.
    """
    dists = list(dists)
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim == 1:
        deltas = np.broadcast_to(deltas, (len(dists), deltas.size))
    if seeds is None:
        seeds = list(range(len(dists)))
    out = np.zeros(deltas.shape)
    for lo in range(0, len(dists), _CHUNK):
        hi = min(lo + _CHUNK, len(dists))
        x = np.stack([_draws(d.mu, d.b, n_steps, s) for d, s in zip(dists[lo:hi], seeds[lo:hi])])
        out[lo:hi] = _simulate_resets(x, np.ascontiguousarray(deltas[lo:hi])) / n_steps
    return np.minimum.accumulate(out, axis=1)


def error_bound(delta: float, path_betas) -> float:
    """β-discounted bound on the expected end-to-end reporting error.

    ``path_betas`` holds β for the hops upstream of the last one.
    """
    betas = np.asarray(path_betas, dtype=float)
    slack = betas.size - float(betas.sum())
    if slack < 0:
        warnings.warn("sum of upstream insertion probabilities exceeds the hop count; clamping to 0")
        slack = 0.0
    return slack * float(delta)


def overhead(path_betas, b0: int = SHIM_BITS, b_h: int = HOP_BITS, b: int = REPORT_BITS,
             per_packet_shim: bool = False) -> float:
    """Expected telemetry bits per packet over a path with the given per-hop β.

    By default the shim is charged at every hop together with the hop
    metadata; ``per_packet_shim`` charges it once per packet instead.
    """
    betas = np.asarray(path_betas, dtype=float)
    H = betas.size
    fixed = b0 + b_h * H if per_packet_shim else (b0 + b_h) * H
    return fixed + b * float(betas.sum())


def report_bits(metric: MetricKind) -> int:
    return 2 * REPORT_BITS if MetricKind(metric).carries_aux else REPORT_BITS


@dataclass
class TradeoffTable:
    """β/E/Γ over the candidate grid for one (slice, metric)."""

    slice_id: int
    metric: MetricKind
    candidates: np.ndarray
    E: np.ndarray
    gamma: np.ndarray
    betas: dict  # path_id -> (n_candidates, hops) array
    cold: bool = False
    pooled: bool = False

    def __len__(self):
        return len(self.candidates)


def build_lookup(
    dists: dict,
    grids: dict,
    paths: dict,
    *,
    seed: int = 0,
    n_steps: int = DEFAULT_STEPS,
    min_samples: int = MIN_HOP_SAMPLES,
    per_packet_shim: bool = False,
    b0: int = SHIM_BITS,
    b_h: int = HOP_BITS,
) -> dict:
    """Trade-off tables for every (slice, metric) in ``grids``.

    ``dists`` maps (slice_id, path_id, hop, metric) to a fitted distribution;
    ``grids`` maps (slice_id, metric) to a :class:`CandidateGrid` (in
    data-plane units); ``paths`` maps slice_id to its ``PathSpec`` list.
    A hop with too few samples borrows the pooled distribution of its
    (slice, metric); a pair with no data at all is marked cold. With several
    paths the error bound is the worst path's and Γ the mean over paths.
    """
    pooled: dict = {}
    for (sid, pid, hop, m), dist in dists.items():
        if dist.reservoir is not None:
            pooled.setdefault((sid, MetricKind(m)), []).append(dist.reservoir)
    pooled_fit = {k: fit_differences(np.concatenate(v)) for k, v in pooled.items() if sum(map(len, v))}

    jobs = []  # (table key, path_id, hop, dist, deltas, seed)
    tables: dict = {}
    for (sid, m) in sorted(grids, key=lambda k: (k[0], MetricKind(k[1]).index)):
        m = MetricKind(m)
        grid = grids[(sid, m)]
        cand = np.asarray(grid.values, dtype=float)
        fallback = pooled_fit.get((sid, m))
        usable = True
        used_pool = False
        series = []
        for p in paths[sid]:
            for hop in range(len(p.hops)):
                d = dists.get((sid, p.path_id, hop, m))
                if d is None or d.n < min_samples:
                    if fallback is None:
                        usable = False
                        break
                    d = fallback
                    used_pool = True
                series.append((p.path_id, hop, d))
            if not usable:
                break
        tables[(sid, m)] = (cand, usable, used_pool)
        if usable:
            for pid, hop, d in series:
                jobs.append(((sid, m), pid, hop, d, cand, _series_seed(seed, sid, m.index, pid, hop)))

    betas_flat = (
        beta_curves([j[3] for j in jobs], np.stack([j[4] for j in jobs]), n_steps, [j[5] for j in jobs])
        if jobs
        else np.zeros((0, 0))
    )
    per_path: dict = {}
    for j, row in zip(jobs, betas_flat):
        per_path.setdefault(j[0], {}).setdefault(j[1], []).append(row)

    out = {}
    for (sid, m), (cand, usable, used_pool) in tables.items():
        b = report_bits(m)
        if not usable:
            log.debug("slice %d %s: no samples, cold", sid, m.value)
            betas = {p.path_id: np.ones((len(cand), len(p.hops))) for p in paths[sid]}
        else:
            betas = {pid: np.stack(rows, axis=1) for pid, rows in per_path[(sid, m)].items()}
        E = np.zeros(len(cand))
        G = np.zeros(len(cand))
        for c, delta in enumerate(cand):
            e_paths = [error_bound(delta, bp[c, :-1]) for bp in betas.values()]
            g_paths = [overhead(bp[c], b0, b_h, b, per_packet_shim) for bp in betas.values()]
            E[c] = max(e_paths)
            G[c] = float(np.mean(g_paths))
        if not usable:
            E[:] = E[0]
            G[:] = G[0]
        out[(sid, m)] = TradeoffTable(sid, m, cand, E, G, betas, cold=not usable, pooled=used_pool)
    return out


def fit_exports(samples: dict, reservoir_size: int = 1024) -> dict:
    """Fit every non-empty exported reservoir; keys are kept as given."""
    out = {}
    for key, xs in samples.items():
        try:
            out[key] = fit_differences(xs, reservoir_size)
        except InsufficientDataError:
            continue
    return out


def write_tables_csv(tables: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slice", "metric", "delta", "beta_per_hop", "E", "gamma_bits", "cold"])
        for (sid, m) in sorted(tables, key=lambda k: (k[0], MetricKind(k[1]).index)):
            t = tables[(sid, m)]
            worst = max(t.betas, key=lambda pid: (t.betas[pid].shape[1], -pid))
            for c, delta in enumerate(t.candidates):
                hop_betas = ";".join(f"{v:.6f}" for v in t.betas[worst][c])
                w.writerow([sid, m.value, f"{delta:.6g}", hop_betas, f"{t.E[c]:.6g}", f"{t.gamma[c]:.6g}", int(t.cold)])

