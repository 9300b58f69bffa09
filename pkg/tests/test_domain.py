from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicetel.domain import make_workload, three_tier
from slicetel.domain.config import dump_config, load_config, save_config
from slicetel.domain.topology import ACCESS, HOST, calibrate_capacities, offered_load
from slicetel.domain.types import (
    DEFAULT_GRID_CODES,
    CandidateGrid,
    MetricKind,
    PathSpec,
    SliceType,
    from_dataplane_units,
    tolerance_of,
    to_dataplane_units,
)
from slicetel.domain.workload import WORKLOAD_TABLE, type_counts, within_table
from slicetel.errors import ConfigError


def test_type_counts_sp_300():
    c = type_counts("SP", 300)
    assert c == {SliceType.URLLC: 180, SliceType.EMBB: 60, SliceType.MMTC: 60}


def test_type_counts_bal_three_slices():
    assert type_counts("BAL", 3) == {SliceType.URLLC: 1, SliceType.EMBB: 1, SliceType.MMTC: 1}


@given(st.sampled_from(["SP", "BAL", "LP"]), st.integers(3, 500))
def test_type_counts_sum(mix, n):
    assert sum(type_counts(mix, n).values()) == n


def test_unknown_mix():
    with pytest.raises(ConfigError):
        type_counts("XX", 10)


def test_workload_within_table_and_types():
    slices = make_workload("SP", 300, 7)
    counts = {t: sum(s.slice_type is t for s in slices) for t in SliceType}
    assert counts == {SliceType.URLLC: 180, SliceType.EMBB: 60, SliceType.MMTC: 60}
    assert all(within_table(s) for s in slices)


def test_workload_deterministic():
    assert dump_config(make_workload("BAL", 30, 3)) == dump_config(make_workload("BAL", 30, 3))
    assert dump_config(make_workload("BAL", 30, 3)) != dump_config(make_workload("BAL", 30, 4))


def test_path_ids_unique_at_1000_paths():
    # with ~1000 paths a 16-bit random draw collides with probability close to 1; ids must be redrawn
    p_collide = 1 - math.prod(1 - i / 65536 for i in range(1000))
    assert p_collide > 0.99
    slices = make_workload("BAL", 600, 1)
    ids = [p.path_id for s in slices for p in s.paths]
    assert len(ids) >= 1000
    assert len(set(ids)) == len(ids)
    assert all(0 <= i < 1 << 16 for i in ids)


def test_paths_follow_topology():
    topo = three_tier()
    for s in make_workload("BAL", 20, 2, topology=topo):
        for p in s.paths:
            assert topo.tiers[p.hops[0]] == ACCESS and topo.tiers[p.hops[-1]] == ACCESS
            assert topo.link(p.hops[-1], p.ports[-1]).dst == HOST
            for a, b, port in zip(p.hops, p.hops[1:], p.ports):
                assert topo.link(a, port).dst == b


def test_tolerance_default_fraction():
    s = make_workload("BAL", 3, 0)[0]
    for m in MetricKind:
        assert tolerance_of(s, m) == pytest.approx(0.05 * s.sla_targets[m])


def test_unit_conversions():
    assert to_dataplane_units(MetricKind.LATENCY, 1.5) == 1_500_000
    assert from_dataplane_units(MetricKind.LATENCY, 1_500_000) == 1.5
    assert to_dataplane_units(MetricKind.LOSS, 0.01, loss_scale=200) == pytest.approx(2.0)
    assert from_dataplane_units(MetricKind.LOSS, 2.0, loss_scale=200) == pytest.approx(0.01)


def test_candidate_grid():
    g = CandidateGrid.for_tolerance(320.0)
    assert g.step == 10.0
    assert g.values[0] == 0 and g.values[-1] == 1920.0
    assert len(g) == len(DEFAULT_GRID_CODES) == 16
    with pytest.raises(ConfigError):
        CandidateGrid(0.0)
    with pytest.raises(ConfigError):
        CandidateGrid(1.0, (0, 2, 1))
    with pytest.raises(ConfigError):
        CandidateGrid(1.0, (0, 300))


def test_pathspec_validation():
    with pytest.raises(ConfigError):
        PathSpec(1 << 16, (1, 2), (1, 1))
    with pytest.raises(ConfigError):
        PathSpec(1, (1, 2), (1,))


def test_config_round_trip(tmp_path):
    topo = three_tier()
    slices = make_workload("LP", 12, 9, topology=topo)
    path = tmp_path / "w.yaml"
    save_config(path, slices, topo)
    back, topo2 = load_config(path)
    assert back == slices
    assert topo2.to_dict() == topo.to_dict()


def test_config_rejects_garbage(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("just: text\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_three_tier_capacities():
    topo = three_tier()
    caps = {topo.link(a, topo.port_of(a, b)).capacity_bps for a, b in [(0, 8), (8, 12), (12, 13)]}
    assert caps == {25e9, 40e9, 100e9}
    assert len(topo.routes(0, 7)) == 2


def test_calibrate_capacities_hits_target():
    topo = three_tier()
    slices = make_workload("BAL", 10, 1, topology=topo)
    cal = calibrate_capacities(topo, slices, 0.5)
    util = max(bits / cal.link(n, p).capacity_bps for (n, p), bits in offered_load(cal, slices).items())
    assert util == pytest.approx(0.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_workload_sla_in_table(seed):
    for s in make_workload("BAL", 6, seed):
        row = WORKLOAD_TABLE[s.slice_type]
        lo, hi = row["packet_bytes"]
        assert s.traffic.packet_bytes == (lo, hi)
        assert within_table(s)
