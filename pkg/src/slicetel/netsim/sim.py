"""End-to-end simulation: forwarding once, then telemetry replay per scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from slicetel.control import Controller, ControllerConfig
from slicetel.domain.topology import Topology, calibrate_capacities, three_tier
from slicetel.domain.types import ALL_METRICS, DEFAULT_GRID_CODES, CandidateGrid, MetricKind, SliceType, to_dataplane_units
from slicetel.errors import ConfigError
from slicetel.netsim.forwarding import ForwardingConfig, Trace, forward
from slicetel.netsim.measure import ResultSet, measure, truth_values
from slicetel.netsim.replay import ReplayConfig, StaticPolicy, hop_events, replay
from slicetel.netsim.traffic import NS_PER_S


@dataclass
class SimConfig:
    duration_s: float = 20.0
    tau_s: float = 5.0
    seed: int = 0
    scale: float = 100.0
    warmup_epochs: float = 1
    target_utilization: float | None = None  # rescale capacities so the busiest port runs at this load
    wrr_weights: tuple = (4, 2, 1)
    buffer_bytes: float = 22_000_000
    processing_ns: int = 1_000
    d: int = 2
    w: int = 4096
    hash_seed: int = 0
    ideal_table: bool = False
    headroom_bytes: int = 64
    reservoir_size: int = 1024
    notification_bits: int = 64
    tolerance_fraction: float = 0.05
    grid_divisions: int = 32
    grid_codes: tuple = DEFAULT_GRID_CODES
    record_timings: bool = False

    def validate(self) -> None:
        bad = []
        if self.duration_s <= 0:
            bad.append("duration_s")
        if self.tau_s <= 0:
            bad.append("tau_s")
        if self.scale <= 0:
            bad.append("scale")
        if self.warmup_epochs < 0:
            bad.append("warmup_epochs")
        if self.d < 1 or self.w < 1:
            bad.append("d/w")
        if not 0 < self.tolerance_fraction:
            bad.append("tolerance_fraction")
        if bad:
            raise ConfigError(f"invalid simulation settings: {', '.join(bad)}", bad)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown simulation settings: {unknown}", unknown)
        cfg = cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})
        cfg.validate()
        return cfg


@dataclass
class Prepared:
    """Everything shared by the schemes compared on one (workload, seed)."""

    cfg: SimConfig
    slices: list
    topology: Topology
    trace: Trace
    events: tuple
    truth: np.ndarray
    tolerances: dict  # slice_id -> [ε latency ns, ε jitter ns, ε loss packets]
    loss_scale: dict  # slice_id -> expected packets per path per epoch
    grids: dict = field(default_factory=dict)

    @property
    def warmup_ns(self) -> int:
        return int(self.cfg.warmup_epochs * self.cfg.tau_s * NS_PER_S)


def dataplane_tolerances(slices, cfg: SimConfig):
    tol, scale = {}, {}
    for s in slices:
        n_paths = max(1, len(s.paths))
        ls = s.traffic.packet_rate / cfg.scale / n_paths * cfg.tau_s
        scale[s.slice_id] = ls
        vec = [None, None, None]
        for m in s.metrics:
            eps = cfg.tolerance_fraction * s.sla_targets[m]
            vec[m.index] = to_dataplane_units(m, eps, loss_scale=ls)
        tol[s.slice_id] = vec
    return tol, scale


def prepare(slices, cfg: SimConfig, topology: Topology | None = None, transforms=()) -> Prepared:
    """Run forwarding once and precompute truth and tolerances.

    ``transforms`` are callables ``trace -> trace`` applied to the ground
    truth before any telemetry scheme sees it (used to inject controlled
    per-hop latency patterns).
    """
    cfg.validate()
    topology = topology or three_tier()
    if cfg.target_utilization is not None:
        scaled = [replace(s, traffic=s.traffic.scaled(1.0)) for s in slices]
        topology = calibrate_capacities(topology, scaled, cfg.target_utilization)
    fcfg = ForwardingConfig(cfg.scale, tuple(cfg.wrr_weights), cfg.buffer_bytes, cfg.processing_ns)
    trace = forward(slices, topology, cfg.duration_s, cfg.seed, fcfg)
    for tf in transforms:
        trace = tf(trace)
    tol, ls = dataplane_tolerances(slices, cfg)
    grids = make_grids(slices, tol, cfg)
    return Prepared(cfg, list(slices), topology, trace, hop_events(trace), truth_values(trace), tol, ls, grids)


def make_grids(slices, tolerances: dict, cfg: SimConfig) -> dict:
    """Candidate threshold grid per monitored (slice, metric)."""
    grids = {}
    for s in slices:
        for m in s.metrics:
            eps = tolerances[s.slice_id][m.index]
            if eps and eps > 0:
                grids[(s.slice_id, m)] = CandidateGrid.for_tolerance(eps, cfg.grid_divisions, cfg.grid_codes)
    return grids


def retimed(prep: Prepared, tau_s: float, warmup_ns: int | None = None) -> Prepared:
    """The same trace under a different epoch length.

    Loss tolerances are counted per epoch, so tolerances and grids are
    recomputed. ``warmup_ns`` pins the excluded start-up window so runs with
    different epochs are scored on the same packets.
    """
    warm = prep.warmup_ns if warmup_ns is None else warmup_ns
    cfg = replace(prep.cfg, tau_s=tau_s, warmup_epochs=warm / (tau_s * NS_PER_S))
    tol, ls = dataplane_tolerances(prep.slices, cfg)
    return replace(prep, cfg=cfg, tolerances=tol, loss_scale=ls, grids=make_grids(prep.slices, tol, cfg))


class ControllerPolicy:
    name = "adaptive"

    def __init__(self, controller: Controller):
        self.controller = controller

    @property
    def decisions(self):
        return self.controller.decisions

    def initial(self) -> dict:
        return self.controller.initial_decision().thresholds()

    def on_epoch(self, epoch: int, samples: dict):
        return self.controller.run_epoch(epoch, samples).thresholds()


def type_units(prep: Prepared) -> dict:
    """Grid step of the median tolerance per (slice type or 'all', metric)."""
    out = {}
    groups = {"all": prep.slices}
    for st in SliceType:
        groups[st] = [s for s in prep.slices if s.slice_type is st]
    for name, group in groups.items():
        for m in ALL_METRICS:
            vals = [prep.tolerances[s.slice_id][m.index] for s in group if prep.tolerances[s.slice_id][m.index]]
            if vals:
                out[(name, m)] = float(np.median(vals)) / prep.cfg.grid_divisions
    return out


def static_thresholds(prep: Prepared, multipliers) -> dict:
    """Static thresholds: one multiplier for every slice, or one per slice type.

    The threshold is ``k`` times the grid step of the median tolerance over
    all slices (slice-agnostic) or over the slice's type (slice-aware).
    """
    units = type_units(prep)
    per_type = isinstance(multipliers, (list, tuple, dict))
    if per_type and not isinstance(multipliers, dict):
        multipliers = dict(zip(SliceType, multipliers))
    out = {}
    for s in prep.slices:
        vec = [None, None, None]
        for m in s.metrics:
            if prep.tolerances[s.slice_id][m.index] is None:
                continue
            if per_type:
                vec[m.index] = multipliers[s.slice_type] * units[(s.slice_type, m)]
            else:
                vec[m.index] = float(multipliers) * units[("all", m)]
        out[s.slice_id] = vec
    return out


def make_policy(prep: Prepared, scheme: dict):
    kind = scheme.get("scheme")
    if kind == "adaptive":
        known = {f.name for f in fields(ControllerConfig)}
        opts = {k: v for k, v in scheme.items() if k in known}
        if "lam" in scheme:
            opts["lam"] = float(scheme["lam"])
        opts.setdefault("tau_s", prep.cfg.tau_s)
        opts.setdefault("seed", prep.cfg.seed)
        grid_tol = {key: prep.tolerances[key[0]][MetricKind(key[1]).index] for key in prep.grids}
        ctrl = Controller(prep.slices, grid_tol, prep.grids, ControllerConfig(**opts))
        return ControllerPolicy(ctrl)
    if kind == "agnostic":
        return StaticPolicy(static_thresholds(prep, float(scheme["k"])))
    if kind == "aware":
        return StaticPolicy(static_thresholds(prep, tuple(float(x) for x in scheme["k"])))
    if kind == "fixed":
        th = {int(k): v for k, v in scheme["thresholds"].items()}
        return StaticPolicy(th)
    raise ConfigError(f"unknown scheme {kind!r}", ["scheme"])


@dataclass
class RunOutput:
    scheme: dict
    result: ResultSet
    decisions: list = field(default_factory=list)
    replay: object = None


def run_scheme(prep: Prepared, scheme: dict, *, keep_replay: bool = False) -> RunOutput:
    """Evaluate one monitoring scheme on a prepared trace."""
    kind = scheme.get("scheme")
    if kind in ("pint", "sketch"):
        from slicetel import baselines

        return baselines.run_baseline(prep, scheme, keep_replay=keep_replay)
    policy = make_policy(prep, scheme)
    rcfg = ReplayConfig(
        tau_s=prep.cfg.tau_s,
        d=prep.cfg.d,
        w=prep.cfg.w,
        hash_seed=prep.cfg.hash_seed,
        ideal_table=prep.cfg.ideal_table,
        headroom_bytes=prep.cfg.headroom_bytes,
        reservoir_size=prep.cfg.reservoir_size,
        notification_bits=prep.cfg.notification_bits,
        collect_samples=kind == "adaptive",
    )
    rep = replay(prep.trace, policy, rcfg, prep.events)
    result = measure(
        prep.trace,
        rep,
        prep.tolerances,
        warmup_ns=prep.warmup_ns,
        notification_bits=prep.cfg.notification_bits,
        truth=prep.truth,
    )
    return RunOutput(scheme, result, rep.decisions, rep if keep_replay else None)


def run(slices, cfg: SimConfig, scheme: dict, topology: Topology | None = None) -> RunOutput:
    """Convenience wrapper: forwarding plus one scheme."""
    return run_scheme(prepare(slices, cfg, topology), scheme)


def finite(x) -> bool:
    return x is not None and not (isinstance(x, float) and math.isnan(x))
