"""Experiment driver: spec loading, sweeps, paired scheme runs, CSV output and frontiers."""

from __future__ import annotations

import csv
import glob
import hashlib
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from slicetel import __version__
from slicetel.control import DECISION_COLUMNS, AllocationProblem, PairCandidates, solve_exact, solve_greedy, write_decisions_csv
from slicetel.domain.config import dump_config, load_config
from slicetel.domain.topology import three_tier
from slicetel.domain.types import ALL_SLICE_TYPES, MetricKind
from slicetel.domain.workload import MIXES, make_workload
from slicetel.errors import ConfigError

log = logging.getLogger(__name__)

SCHEMES = ("adaptive", "agnostic", "aware", "fixed", "pint", "sketch")
SUMMARY_COLUMNS = [
    "run_id",
    "scheme",
    "params",
    "seed",
    "run_seed",
    "status",
    "bits_per_packet",
    "overhead_ratio",
    "violation_fraction",
    "violation_urllc",
    "violation_embb",
    "violation_mmtc",
    "steady_miss_rate",
    "error",
]
RESULT_PREFIX = ["run_id", "scheme", "params", "seed"]


# spec --------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    name: str
    workload: dict
    schemes: list
    seeds: list = field(default_factory=lambda: [0])
    sim: dict = field(default_factory=dict)
    transforms: list = field(default_factory=list)
    output: str = "out"
    base_dir: str = "."  # directory relative config paths resolve against

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "workload": self.workload,
            "schemes": self.schemes,
            "seeds": self.seeds,
            "sim": self.sim,
            "transforms": self.transforms,
            "output": self.output,
        }


def spec_from_dict(doc, base_dir: str = ".") -> ExperimentSpec:
    """Validate a parsed spec; every problem is reported at once."""
    if not isinstance(doc, dict):
        raise ConfigError("experiment spec must be a mapping", ["<root>"])
    from slicetel.netsim.sim import SimConfig

    bad = []
    known = {"name", "workload", "schemes", "seeds", "sim", "transforms", "output"}
    bad += [f"unknown key '{k}'" for k in sorted(set(doc) - known)]
    if not isinstance(doc.get("name"), str) or not doc.get("name"):
        bad.append("name")
    wl = doc.get("workload")
    if not isinstance(wl, dict):
        bad.append("workload")
    elif "config" not in wl:
        if wl.get("mix") not in MIXES:
            bad.append("workload.mix")
        if not isinstance(wl.get("n_slices"), int) or wl.get("n_slices", 0) < 1:
            bad.append("workload.n_slices")
    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        bad.append("seeds")
    try:
        SimConfig.from_dict(doc.get("sim") or {})
    except ConfigError as exc:
        bad += [f"sim.{f}" for f in exc.fields]
    except TypeError:
        bad.append("sim")
    schemes = doc.get("schemes")
    if not isinstance(schemes, list) or not schemes:
        bad.append("schemes")
    else:
        for i, s in enumerate(schemes):
            if not isinstance(s, dict) or s.get("scheme") not in SCHEMES:
                bad.append(f"schemes[{i}].scheme")
                continue
            sweep = s.get("sweep", {})
            if not isinstance(sweep, dict) or not all(isinstance(v, list) and v for v in sweep.values()):
                bad.append(f"schemes[{i}].sweep")
    for i, t in enumerate(doc.get("transforms") or []):
        if not isinstance(t, dict) or t.get("kind") not in TRANSFORMS:
            bad.append(f"transforms[{i}].kind")
    if bad:
        raise ConfigError("invalid experiment spec: " + "; ".join(bad), bad)
    return ExperimentSpec(
        name=doc["name"],
        workload=dict(wl),
        schemes=[dict(s) for s in schemes],
        seeds=list(seeds),
        sim=dict(doc.get("sim") or {}),
        transforms=list(doc.get("transforms") or []),
        output=str(doc.get("output", "out")),
        base_dir=base_dir,
    )


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})", ["<yaml>"]) from exc
    return spec_from_dict(doc, str(path.parent))


def _transform(t: dict):
    from slicetel import baselines

    args = {k: v for k, v in t.items() if k != "kind"}
    if "hops" in args:
        args["hops"] = tuple(args["hops"])
    return TRANSFORMS[t["kind"]](baselines)(**args)


TRANSFORMS = {
    "anticorrelation": lambda b: b.inject_anticorrelation,
    "hop_noise": lambda b: b.inject_hop_noise,
}


def build_workload(spec: ExperimentSpec, seed: int):
    """Slices and topology for one seed; a config file pins the workload for every seed."""
    wl = spec.workload
    if "config" in wl:
        slices, topo = load_config(Path(spec.base_dir) / wl["config"])
        return slices, topo or three_tier()
    topo = three_tier()
    wseed = int(wl.get("seed", seed))
    slices = make_workload(
        wl["mix"],
        wl["n_slices"],
        wseed,
        topology=topo,
        tolerance_fraction=float(spec.sim.get("tolerance_fraction", 0.05)),
        max_paths=int(wl.get("max_paths", 2)),
    )
    return slices, topo


# run expansion ------------------------------------------------------------------


@dataclass
class RunSpec:
    index: int
    run_id: str
    seed: int  # traffic seed, shared by every scheme on the same workload
    run_seed: int  # scheme-internal randomness
    scheme: dict
    params: str


def run_seed(base_seed: int, run_index: int) -> int:
    return int(np.random.SeedSequence([base_seed, run_index]).generate_state(1)[0])


def _fmt_param(v) -> str:
    if isinstance(v, (list, tuple)):
        return "_".join(_fmt_param(x) for x in v)
    return f"{v:g}" if isinstance(v, float) else str(v)


def expand_runs(spec: ExperimentSpec) -> list[RunSpec]:
    """Every (seed, scheme, sweep point) combination in a stable order."""
    runs = []
    idx = 0
    for seed in spec.seeds:
        for s in spec.schemes:
            base = {k: v for k, v in s.items() if k != "sweep"}
            sweep = s.get("sweep", {})
            names = list(sweep)
            for combo in itertools.product(*(sweep[n] for n in names)):
                scheme = dict(base)
                scheme.update(zip(names, combo))
                swept = ",".join(f"{n}={_fmt_param(v)}" for n, v in zip(names, combo))
                fixed = [f"{n}={_fmt_param(v)}" for n, v in base.items() if n not in ("scheme", "thresholds")]
                params = ",".join(([swept] if swept else []) + fixed)
                slug = "".join(c if c.isalnum() or c in "=._-" else "-" for c in swept.replace(",", "-"))
                run_id = f"r{idx:03d}-{scheme['scheme']}" + (f"-{slug}" if slug else "") + f"-s{seed}"
                runs.append(RunSpec(idx, run_id, seed, run_seed(seed, idx), scheme, params))
                idx += 1
    return runs


# csv helpers -------------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{float(v):.10g}"
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _static_decision_rows(prep, scheme: dict):
    from slicetel.netsim.sim import make_policy

    pol = make_policy(prep, scheme)
    for sid in sorted(pol.fixed):
        for m in MetricKind:
            v = pol.fixed[sid][m.index]
            if v is not None:
                yield [0, sid, m.value, f"{v:.6g}", "", "", "", "static", ""]


# execution ----------------------------------------------------------------------


def _execute_group(spec_dict: dict, base_dir: str, out_dir: str, seed: int, runs: list) -> list[dict]:
    """Prepare one seed's trace and evaluate the given runs on it."""
    from slicetel.netsim.sim import SimConfig, prepare

    spec = spec_from_dict(spec_dict, base_dir)
    records = []
    try:
        slices, topo = build_workload(spec, seed)
        cfg = SimConfig.from_dict({**spec.sim, "seed": seed})
        prep = prepare(slices, cfg, topo, [_transform(t) for t in spec.transforms])
    except Exception as exc:  # noqa: BLE001 - recorded per run
        log.exception("prepare failed for seed %d", seed)
        return [_error_record(r, exc) for r in runs]
    for r in runs:
        try:
            records.append(_execute_run(prep, r, Path(out_dir)))
        except Exception as exc:  # noqa: BLE001 - recorded per run
            log.exception("run %s failed", r.run_id)
            records.append(_error_record(r, exc))
    return records


def _error_record(r: RunSpec, exc: Exception) -> dict:
    return {
        "run_id": r.run_id,
        "scheme": r.scheme["scheme"],
        "params": r.params,
        "seed": r.seed,
        "run_seed": r.run_seed,
        "status": "error",
        "error": f"{type(exc).__name__}: {exc}",
        "files": {},
    }


def _execute_run(prep, r: RunSpec, out_dir: Path) -> dict:
    from slicetel.netsim.sim import run_scheme

    scheme = dict(r.scheme)
    scheme.setdefault("seed", r.run_seed)
    out = run_scheme(prep, scheme)
    run_dir = out_dir / "runs" / r.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    prefix = {"run_id": r.run_id, "scheme": scheme["scheme"], "params": r.params, "seed": r.seed}
    rows = [{**prefix, **row} for row in out.result.rows]
    from slicetel.netsim.measure import RESULT_COLUMNS

    res_path = run_dir / "results.csv"
    write_csv(res_path, RESULT_PREFIX + RESULT_COLUMNS, rows)
    dec_path = run_dir / "decisions.csv"
    if scheme["scheme"] == "adaptive":
        write_decisions_csv(out.decisions, dec_path, prep.cfg.record_timings)
    else:
        with open(dec_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DECISION_COLUMNS)
            if scheme["scheme"] in ("agnostic", "aware", "fixed"):
                w.writerows(_static_decision_rows(prep, scheme))
    summ = out.result.summary
    type_rows = [row for row in out.result.rows if row["scope"] == "type"]
    if not any(row["metric"] == "all" for row in type_rows):  # latency-only baselines
        type_rows = [row for row in type_rows if row["metric"] == MetricKind.LATENCY.value]
    by_type = {row["key"]: row["violation_fraction"] for row in type_rows if row["metric"] in ("all", MetricKind.LATENCY.value)}
    bits = summ.get("bits_per_packet")
    if scheme["scheme"] == "sketch":
        bits = summ.get("export_bits_per_packet")
    return {
        "run_id": r.run_id,
        "scheme": scheme["scheme"],
        "params": r.params,
        "seed": r.seed,
        "run_seed": r.run_seed,
        "status": "ok",
        "bits_per_packet": bits,
        "overhead_ratio": summ.get("overhead_ratio"),
        "violation_fraction": summ.get("violation_fraction"),
        "violation_urllc": by_type.get("URLLC"),
        "violation_embb": by_type.get("eMBB"),
        "violation_mmtc": by_type.get("mMTC"),
        "steady_miss_rate": summ.get("steady_miss_rate"),
        "error": "",
        "files": {f"runs/{r.run_id}/results.csv": sha256_file(res_path), f"runs/{r.run_id}/decisions.csv": sha256_file(dec_path)},
    }


def _tasks(runs: list[RunSpec], jobs: int) -> list[tuple[int, list]]:
    """Split runs into per-seed chunks; with spare workers a seed's runs are spread out."""
    by_seed: dict = {}
    for r in runs:
        by_seed.setdefault(r.seed, []).append(r)
    per_seed = max(1, jobs // max(1, len(by_seed)))
    tasks = []
    for seed, rs in by_seed.items():
        k = min(per_seed, len(rs))
        for i in range(k):
            chunk = rs[i::k]
            if chunk:
                tasks.append((seed, chunk))
    return tasks


def cmd_run(spec_or_path, out_dir=None, *, jobs: int | None = None, seed: int | None = None, plots: bool = True) -> int:
    """Execute every run of a spec. Returns the number of failed runs."""
    spec = spec_or_path if isinstance(spec_or_path, ExperimentSpec) else load_spec(spec_or_path)
    if seed is not None:
        spec = replace(spec, seeds=[seed])
    out = Path(out_dir or spec.output)
    out.mkdir(parents=True, exist_ok=True)
    runs = expand_runs(spec)
    jobs = jobs or os.cpu_count() or 1
    spec_dict = spec.to_dict()
    tasks = _tasks(runs, jobs)
    log.info("%s: %d runs in %d task(s) on %d worker(s)", spec.name, len(runs), len(tasks), jobs)
    t0 = time.perf_counter()
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            futs = [pool.submit(_execute_group, spec_dict, spec.base_dir, str(out), s, rs) for s, rs in tasks]
            recs = [r for f in futs for r in f.result()]
    else:
        recs = [r for s, rs in tasks for r in _execute_group(spec_dict, spec.base_dir, str(out), s, rs)]
    order = {r.run_id: r.index for r in runs}
    recs.sort(key=lambda r: order[r["run_id"]])
    log.info("%s: finished in %.1f s", spec.name, time.perf_counter() - t0)

    write_csv(out / "summary.csv", SUMMARY_COLUMNS, recs)
    files = {"summary.csv": sha256_file(out / "summary.csv")}
    wl_text = None
    if "config" not in spec.workload:
        slices, topo = build_workload(spec, spec.seeds[0])
        wl_text = dump_config(slices)
    else:
        wl_text = (Path(spec.base_dir) / spec.workload["config"]).read_text()
    (out / "workload.yaml").write_text(wl_text)
    files["workload.yaml"] = sha256_file(out / "workload.yaml")
    canon = json.dumps(spec_dict, sort_keys=True, separators=(",", ":"))
    manifest = {
        "name": spec.name,
        "code_version": __version__,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "spec": spec_dict,
        "runs": [
            {k: rec[k] for k in ("run_id", "scheme", "params", "seed", "run_seed", "status", "error")}
            | {"config": next(r.scheme for r in runs if r.run_id == rec["run_id"])}
            for rec in recs
        ],
        "files": files | {k: v for rec in recs for k, v in sorted(rec["files"].items())},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if plots:
        from slicetel import plotting

        plotting.plot_summary(recs, out / "summary.png")
    failed = sum(1 for r in recs if r["status"] != "ok")
    if failed:
        log.error("%d of %d runs failed", failed, len(recs))
    return failed


# frontier ----------------------------------------------------------------------


@dataclass
class FrontierPoint:
    scheme: str
    params: str
    bits_per_packet: float
    violation_fraction: float
    by_type: dict = field(default_factory=dict)
    run_id: str = ""
    seed: int = 0


def pareto_front(points, x=lambda p: p[0], y=lambda p: p[1]) -> list:
    """Points not strictly worse in both coordinates than another point.

    Sorting by ``x`` and sweeping the running minimum of ``y`` over strictly
    smaller ``x`` gives O(n log n). Input order is kept in the output.
    """
    pts = list(points)
    order = sorted(range(len(pts)), key=lambda i: x(pts[i]))
    keep = set()
    best = math.inf
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and x(pts[order[j]]) == x(pts[order[i]]):
            j += 1
        group = order[i:j]
        for g in group:
            if not y(pts[g]) > best:
                keep.add(g)
        best = min(best, min(y(pts[g]) for g in group))
        i = j
    return [pts[i] for i in range(len(pts)) if i in keep]


def read_points(paths, by: str = "all") -> list[FrontierPoint]:
    """One point per results file (overall overhead vs violations of ``by``)."""
    pts = []
    for p in paths:
        with open(p, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            continue
        metric = "all" if any(r["metric"] == "all" for r in rows) else MetricKind.LATENCY.value
        overall = next((r for r in rows if r["scope"] == "all" and r["metric"] == metric), None)
        if overall is None:
            continue
        types = {r["key"]: _num(r["violation_fraction"]) for r in rows if r["scope"] == "type" and r["metric"] == metric}
        viol = _num(overall["violation_fraction"]) if by == "all" else types.get(_type_key(by), math.nan)
        pts.append(
            FrontierPoint(
                overall["scheme"], overall["params"], _num(overall["bits_per_packet"]), viol, types, overall["run_id"], int(overall["seed"])
            )
        )
    return pts


def _type_key(by: str) -> str:
    for st in ALL_SLICE_TYPES:
        if st.value.lower() == by.lower():
            return st.value
    raise ConfigError(f"unknown slice type {by!r}", ["by"])


def _num(s) -> float:
    return float(s) if s not in ("", None) else math.nan


FRONTIER_COLUMNS = ["scheme", "params", "seed", "run_id", "bits_per_packet", "violation_fraction", "violation_urllc", "violation_embb", "violation_mmtc"]


def cmd_frontier(results_glob: str, out_path=None, *, by: str = "all", plots: bool = True) -> list[FrontierPoint]:
    """Pareto-optimal points per scheme over (bits/packet, violation fraction)."""
    paths = sorted(glob.glob(results_glob, recursive=True))
    pts = [p for p in read_points(paths, by) if not (math.isnan(p.bits_per_packet) or math.isnan(p.violation_fraction))]
    if not pts:
        log.warning("no usable results matched %s; frontier is empty", results_glob)
    front = []
    for scheme in sorted({p.scheme for p in pts}):
        mine = [p for p in pts if p.scheme == scheme]
        front += sorted(pareto_front(mine, lambda p: p.bits_per_packet, lambda p: p.violation_fraction), key=lambda p: p.bits_per_packet)
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        rows = [
            {
                "scheme": p.scheme,
                "params": p.params,
                "seed": p.seed,
                "run_id": p.run_id,
                "bits_per_packet": p.bits_per_packet,
                "violation_fraction": p.violation_fraction,
                "violation_urllc": p.by_type.get("URLLC"),
                "violation_embb": p.by_type.get("eMBB"),
                "violation_mmtc": p.by_type.get("mMTC"),
            }
            for p in front
        ]
        write_csv(out_path, FRONTIER_COLUMNS, rows)
        if plots and pts:
            from slicetel import plotting

            plotting.plot_frontier(pts, front, out_path.with_suffix(".png"), by)
    return front


# microbenchmarks ----------------------------------------------------------------

TAU_VALUES = (1, 3, 5, 7, 10, 15)
BUCKET_D = (1, 2, 3, 4)
BUCKET_W = (1024, 2048, 4096)
SCALING_SLICES = (50, 100, 150, 200, 250, 300)


def rank_sum(rows, keys=("bits_per_packet", "violation_fraction")) -> list[int]:
    """Sum over ``keys`` of each row's rank (1 = smallest; ties share the lower rank)."""
    total = [0] * len(rows)
    for k in keys:
        vals = [r[k] for r in rows]
        for i, v in enumerate(vals):
            total[i] += 1 + sum(1 for u in vals if u < v)
    return total


def micro_tau(*, mix="BAL", n_slices=30, seed=0, duration_s=60.0, taus=TAU_VALUES, lam=0.6, sim: dict | None = None) -> list[dict]:
    """Adaptive control under several epoch lengths on one trace, scored after the longest epoch."""
    from slicetel.netsim.sim import SimConfig, prepare, retimed, run_scheme

    topo = three_tier()
    slices = make_workload(mix, n_slices, seed, topology=topo)
    cfg = SimConfig.from_dict({**(sim or {}), "duration_s": duration_s, "seed": seed, "tau_s": max(taus)})
    prep = prepare(slices, cfg, topo)
    warm = int(max(taus) * 1e9)
    rows = []
    for tau in taus:
        p = retimed(prep, float(tau), warm)
        out = run_scheme(p, {"scheme": "adaptive", "lam": lam, "seed": seed})
        s = out.result.summary
        rows.append({"tau_s": tau, "bits_per_packet": s["bits_per_packet"], "violation_fraction": s["violation_fraction"],
                     "reports_per_s": s["reports_per_s"], "epochs": len(out.decisions)})
    for r, rs in zip(rows, rank_sum(rows)):
        r["rank_sum"] = rs
    return rows


def micro_buckets(*, n_keys=1000, hops=2, n_packets=100_000, hash_seeds=(0,), ds=BUCKET_D, ws=BUCKET_W, seed=0) -> list[dict]:
    from slicetel.buckets_bench import bucket_benchmark

    rows = []
    for d, w, hs in itertools.product(ds, ws, hash_seeds):
        r = bucket_benchmark(n_keys, d, w, hs, hops=hops, n_packets=n_packets, seed=seed)
        rows.append({"d": d, "w": w, "hash_seed": hs, "keys": n_keys, "lookups": r.lookups, "misses": r.misses,
                     "cold_misses": r.cold_misses, "evictions": r.evictions, "steady_miss_rate": r.steady_miss_rate,
                     "recovery_overhead": r.recovery_overhead})
    return rows


def synthetic_samples(slices, tolerances: dict, seed: int, n: int = 256) -> dict:
    """Laplace difference samples per (slice, path, hop, metric) scaled to each tolerance."""
    rng = np.random.default_rng(seed)
    out = {}
    for s in slices:
        for m in s.metrics:
            eps = tolerances[s.slice_id][m.index]
            if not eps:
                continue
            for p in s.paths:
                for h in range(len(p.hops)):
                    b = eps / 32 * rng.uniform(0.5, 8.0)
                    out[(s.slice_id, p.path_id, h, m)] = rng.laplace(0.0, b, n)
    return out


def micro_solver_scaling(*, counts=SCALING_SLICES, mix="BAL", seed=0, n_steps=2000, budget_fraction=0.8, time_budget_s=2.5) -> list[dict]:
    """Lookup-building and solve wall times versus slice count.

    The exact solver runs with an aggregate overhead budget (a fraction of
    the unconstrained optimum's total) so that pairs are coupled.
    """
    from slicetel.estimator import build_lookup, fit_exports
    from slicetel.netsim.sim import SimConfig, dataplane_tolerances, make_grids

    cfg = SimConfig()
    topo = three_tier()
    rows = []
    for n in counts:
        slices = make_workload(mix, n, seed, topology=topo)
        tol, _ = dataplane_tolerances(slices, cfg)
        grids = make_grids(slices, tol, cfg)
        dists = fit_exports(synthetic_samples(slices, tol, seed))
        t0 = time.perf_counter()
        tables = build_lookup(dists, grids, {s.slice_id: s.paths for s in slices}, seed=seed, n_steps=n_steps)
        lookup_ms = (time.perf_counter() - t0) * 1e3
        types = {s.slice_id: s.slice_type for s in slices}
        pairs = []
        for (sid, m), t in sorted(tables.items(), key=lambda kv: (kv[0][0], MetricKind(kv[0][1]).index)):
            eps = tol[sid][MetricKind(m).index]
            gmax = float(t.gamma.max()) or 1.0
            pairs.append(PairCandidates(sid, m, t.candidates, t.E, t.gamma, eps, types[sid], e_weight=1.0 / eps, g_weight=1.0 / gmax))
        free = solve_exact(AllocationProblem(pairs, 0.5))
        budget = budget_fraction * sum(free.gamma.values())
        prob = AllocationProblem(pairs, 0.5, budget, time_budget_s)
        t0 = time.perf_counter()
        try:
            ex = solve_exact(prob)
            prov = ex.provenance
        except Exception as exc:  # noqa: BLE001 - the fallback case is the measurement
            prov = type(exc).__name__
        exact_ms = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        solve_greedy(prob)
        greedy_ms = (time.perf_counter() - t0) * 1e3
        rows.append({"slices": n, "pairs": len(pairs), "lookup_ms": lookup_ms, "exact_ms": exact_ms,
                     "exact_provenance": prov, "greedy_ms": greedy_ms})
    return rows


MICRO = {"tau": micro_tau, "buckets": micro_buckets, "solver-scaling": micro_solver_scaling}


def cmd_micro(kind: str, out_dir, *, seed: int = 0, plots: bool = True, **kwargs) -> Path:
    if kind not in MICRO:
        raise ConfigError(f"unknown microbenchmark {kind!r}; choose from {sorted(MICRO)}", ["kind"])
    rows = MICRO[kind](seed=seed, **kwargs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"micro_{kind}.csv"
    write_csv(path, list(rows[0]), rows)
    if plots:
        from slicetel import plotting

        plotting.plot_micro(kind, rows, path.with_suffix(".png"))
    return path
