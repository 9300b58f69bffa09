"""Per-epoch threshold selection: exact solver with early stopping and a greedy fallback."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from slicetel.domain.types import MetricKind, SliceType
from slicetel.errors import ConfigError, FallbackRequired

log = logging.getLogger(__name__)

EXACT, EARLY_STOPPED, HEURISTIC, COLD = "exact", "early-stopped", "heuristic", "cold"


@dataclass
class PairCandidates:
    """Candidate thresholds of one (slice, metric) with their predicted E and Γ."""

    slice_id: int
    metric: MetricKind
    deltas: np.ndarray
    E: np.ndarray
    gamma: np.ndarray
    tolerance: float
    slice_type: SliceType = SliceType.URLLC
    cold: bool = False
    e_weight: float = 1.0  # objective scaling applied to E
    g_weight: float = 1.0  # objective scaling applied to Γ

    def __post_init__(self):
        self.deltas = np.asarray(self.deltas, dtype=float)
        self.E = np.asarray(self.E, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if not (len(self.deltas) == len(self.E) == len(self.gamma) >= 1):
            raise ConfigError(f"pair ({self.slice_id}, {self.metric}): candidate arrays differ in length")
        if not np.all(np.isfinite(self.deltas)) or np.any(self.E < 0) or np.any(self.gamma < 0):
            raise ConfigError(f"pair ({self.slice_id}, {self.metric}): candidates must be finite with E, Γ >= 0")

    @property
    def key(self):
        return (self.slice_id, MetricKind(self.metric))

    def objective(self, lam: float) -> np.ndarray:
        return lam * self.e_weight * self.E + (1.0 - lam) * self.g_weight * self.gamma

    def feasible(self) -> np.ndarray:
        return self.E <= self.tolerance

    def conservative(self) -> int:
        """Index of the minimum-E candidate (smallest Δ among ties)."""
        return int(np.argmin(self.E))


@dataclass
class AllocationProblem:
    pairs: list
    lam: float = 0.5
    budget: float | None = None  # aggregate Γ over all pairs, bits/packet
    time_budget_s: float = 2.5
    node_limit: int = 200_000

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda {self.lam} outside [0, 1]", ["lam"])


@dataclass
class EpochDecision:
    assignment: dict  # (slice_id, metric) -> Δ
    index: dict  # (slice_id, metric) -> candidate index
    objective: float
    feasible: dict
    provenance: str
    solve_ms: float = 0.0
    E: dict = field(default_factory=dict)
    gamma: dict = field(default_factory=dict)
    epoch: int = 0

    def thresholds(self) -> dict:
        """slice_id -> [latency, jitter, loss] thresholds for deployment."""
        out: dict = {}
        for (sid, m), delta in self.assignment.items():
            out.setdefault(sid, [None, None, None])[MetricKind(m).index] = delta
        return out


def _decision(p: AllocationProblem, index: dict, provenance: str, t0: float) -> EpochDecision:
    pairs = {q.key: q for q in p.pairs}
    obj = 0.0
    out = EpochDecision({}, dict(index), 0.0, {}, provenance)
    for key, c in index.items():
        q = pairs[key]
        obj += float(q.objective(p.lam)[c])
        out.assignment[key] = float(q.deltas[c])
        out.feasible[key] = bool(q.E[c] <= q.tolerance) and not q.cold
        out.E[key] = float(q.E[c])
        out.gamma[key] = float(q.gamma[c])
    out.objective = obj
    out.solve_ms = (time.perf_counter() - t0) * 1e3
    return out


def _best_feasible(q: PairCandidates, lam: float) -> int:
    """Feasible argmin of the objective, ties to the larger Δ; min-E candidate if none is feasible."""
    if q.cold:
        return 0
    feas = np.flatnonzero(q.feasible())
    if feas.size == 0:
        return q.conservative()
    obj = q.objective(lam)[feas]
    best = obj.min()
    ties = feas[np.isclose(obj, best, rtol=1e-12, atol=1e-12)]
    return int(ties[np.argmax(q.deltas[ties])])


def solve_exact(p: AllocationProblem) -> EpochDecision:
    """Minimise the weighted error/overhead objective subject to E <= ε per pair.

    Without an overhead budget the problem separates per pair. With a
    budget a depth-first branch-and-bound runs until it proves optimality,
    exhausts ``node_limit`` or the wall-clock budget; in the latter cases the
    best incumbent is returned as early-stopped, and :class:`FallbackRequired`
    is raised if there is none.
    """
    t0 = time.perf_counter()
    if not p.pairs:
        return _decision(p, {}, EXACT, t0)
    if p.budget is None:
        return _decision(p, {q.key: _best_feasible(q, p.lam) for q in p.pairs}, EXACT, t0)

    # Allowed candidates per pair: C1-feasible ones, else only the conservative choice.
    options = []
    for q in p.pairs:
        if q.cold:
            allowed = np.array([0])
        else:
            allowed = np.flatnonzero(q.feasible())
            if allowed.size == 0:
                allowed = np.array([q.conservative()])
        obj = q.objective(p.lam)[allowed]
        order = np.lexsort((-q.deltas[allowed], obj))
        allowed = allowed[order]
        options.append((q, allowed, q.objective(p.lam)[allowed], q.gamma[allowed]))
    # Branch on the pairs with the widest objective spread first.
    options.sort(key=lambda o: -(o[2].max() - o[2].min()))
    n = len(options)
    min_obj_rest = np.zeros(n + 1)
    min_gam_rest = np.zeros(n + 1)
    for i in range(n - 1, -1, -1):
        min_obj_rest[i] = min_obj_rest[i + 1] + options[i][2].min()
        min_gam_rest[i] = min_gam_rest[i + 1] + options[i][3].min()
    if min_gam_rest[0] > p.budget + 1e-9:
        raise FallbackRequired(f"overhead budget {p.budget} below the minimum achievable {min_gam_rest[0]:.1f}")

    deadline = t0 + p.time_budget_s
    best_obj = math.inf
    best_choice = None
    choice = [0] * n
    nodes = 0
    stopped = False
    stack = [(0, 0.0, 0.0, 0)]  # (depth, objective so far, Γ so far, next option index)
    while stack:
        depth, acc_obj, acc_gam, k = stack.pop()
        if depth == n:
            if acc_obj < best_obj - 1e-12:
                best_obj, best_choice = acc_obj, list(choice)
            continue
        _, allowed, obj, gam = options[depth]
        if k >= len(allowed):
            continue
        nodes += 1
        if nodes > p.node_limit or (nodes & 1023 == 0 and time.perf_counter() > deadline):
            stopped = True
            break
        stack.append((depth, acc_obj, acc_gam, k + 1))
        o = acc_obj + obj[k]
        g = acc_gam + gam[k]
        if o + min_obj_rest[depth + 1] >= best_obj - 1e-12:
            continue
        if g + min_gam_rest[depth + 1] > p.budget + 1e-9:
            continue
        choice[depth] = k
        stack.append((depth + 1, o, g, 0))

    if best_choice is None:
        raise FallbackRequired("no feasible assignment found within the solver budget")
    index = {opt[0].key: int(opt[1][k]) for opt, k in zip(options, best_choice)}
    return _decision(p, index, EARLY_STOPPED if stopped else EXACT, t0)


def criticality_order(pairs) -> list:
    """URLLC before eMBB before mMTC; tighter tolerance first; then slice id."""
    return sorted(pairs, key=lambda q: (SliceType(q.slice_type).rank, q.tolerance, q.slice_id, MetricKind(q.metric).index))


def solve_greedy(p: AllocationProblem) -> EpochDecision:
    """Per pair in criticality order: cheapest feasible candidate, else the most conservative."""
    t0 = time.perf_counter()
    index = {}
    for q in criticality_order(p.pairs):
        if q.cold:
            index[q.key] = 0
            continue
        feas = np.flatnonzero(q.feasible())
        if feas.size == 0:
            index[q.key] = q.conservative()
            continue
        g = q.gamma[feas]
        ties = feas[np.isclose(g, g.min(), rtol=1e-12, atol=1e-12)]
        index[q.key] = int(ties[np.argmax(q.deltas[ties])])
    return _decision(p, index, HEURISTIC, t0)


def solve(p: AllocationProblem) -> EpochDecision:
    """Exact solve, falling back to the greedy heuristic when it signals so."""
    try:
        return solve_exact(p)
    except FallbackRequired as exc:
        log.info("exact solver fell back to greedy: %s", exc)
        return solve_greedy(p)


DECISION_COLUMNS = ["epoch", "slice", "metric", "delta", "E", "gamma_bits", "feasible", "provenance", "solve_ms"]


def decision_rows(d: EpochDecision, record_timings: bool = False):
    for (sid, m) in sorted(d.assignment, key=lambda k: (k[0], MetricKind(k[1]).index)):
        yield [
            d.epoch,
            sid,
            MetricKind(m).value,
            f"{d.assignment[(sid, m)]:.6g}",
            f"{d.E[(sid, m)]:.6g}",
            f"{d.gamma[(sid, m)]:.6g}",
            int(d.feasible[(sid, m)]),
            d.provenance,
            f"{d.solve_ms:.3f}" if record_timings else "",
        ]


def write_decisions_csv(decisions, path, record_timings: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DECISION_COLUMNS)
        for d in decisions:
            w.writerows(decision_rows(d, record_timings))


@dataclass
class ControllerConfig:
    lam: float = 0.5
    tau_s: float = 5.0
    solver_fraction: float = 0.5  # share of the epoch granted to the exact solver
    budget: float | None = None
    node_limit: int = 200_000
    objective_scaling: str = "normalized"  # or "raw"
    per_packet_shim: bool = False
    n_steps: int = 10_000
    min_samples: int = 16
    seed: int = 0
    solver: str = "exact"  # or "greedy"


class Controller:
    """Closed-loop threshold controller: refit, rebuild tables, solve, deploy.

    ``tolerances`` and ``grids`` are keyed by (slice_id, metric) and expressed
    in data-plane units.
    """

    def __init__(self, slices, tolerances: dict, grids: dict, config: ControllerConfig | None = None):
        from slicetel import estimator

        self._est = estimator
        self.cfg = config or ControllerConfig()
        if self.cfg.objective_scaling not in ("normalized", "raw"):
            raise ConfigError(f"unknown objective scaling {self.cfg.objective_scaling!r}", ["objective_scaling"])
        if self.cfg.solver not in ("exact", "greedy"):
            raise ConfigError(f"unknown solver {self.cfg.solver!r}", ["solver"])
        self.slices = {s.slice_id: s for s in slices}
        self.tolerances = dict(tolerances)
        self.grids = dict(grids)
        self.dists: dict = {}
        self.decisions: list = []
        self.tables: dict = {}
        self.lookup_ms = 0.0

    def initial_decision(self) -> EpochDecision:
        """Cold start: every pair at its grid minimum."""
        pairs = self._pairs({key: None for key in self.grids})
        d = _decision(AllocationProblem(pairs, self.cfg.lam), {q.key: 0 for q in pairs}, COLD, time.perf_counter())
        d.epoch = 0
        self.decisions.append(d)
        return d

    def _pairs(self, tables: dict) -> list:
        pairs = []
        for key in sorted(self.grids, key=lambda k: (k[0], MetricKind(k[1]).index)):
            sid, m = key
            grid = self.grids[key]
            t = tables.get(key)
            tol = self.tolerances[key]
            n = len(grid)
            if t is None:
                q = PairCandidates(sid, m, grid.values, np.zeros(n), np.zeros(n), tol, self.slices[sid].slice_type, cold=True)
            else:
                q = PairCandidates(sid, m, t.candidates, t.E, t.gamma, tol, self.slices[sid].slice_type, cold=t.cold)
                if self.cfg.objective_scaling == "normalized":
                    q.e_weight = 1.0 / tol if tol > 0 else 1.0
                    gmax = float(t.gamma.max())
                    q.g_weight = 1.0 / gmax if gmax > 0 else 1.0
            pairs.append(q)
        return pairs

    def run_epoch(self, epoch: int, samples: dict) -> EpochDecision:
        """Refit from exported difference samples and choose the next epoch's thresholds."""
        self.dists.update(self._est.fit_exports(samples))
        t0 = time.perf_counter()
        paths = {sid: s.paths for sid, s in self.slices.items()}
        self.tables = self._est.build_lookup(
            self.dists,
            self.grids,
            paths,
            seed=self.cfg.seed,
            n_steps=self.cfg.n_steps,
            min_samples=self.cfg.min_samples,
            per_packet_shim=self.cfg.per_packet_shim,
        )
        self.lookup_ms = (time.perf_counter() - t0) * 1e3
        problem = AllocationProblem(
            self._pairs(self.tables),
            self.cfg.lam,
            self.cfg.budget,
            self.cfg.solver_fraction * self.cfg.tau_s,
            self.cfg.node_limit,
        )
        d = solve_greedy(problem) if self.cfg.solver == "greedy" else solve(problem)
        d.epoch = epoch
        self.decisions.append(d)
        return d
