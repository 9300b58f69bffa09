from __future__ import annotations

import pytest

from slicetel.dataplane.switch import IdealTable, Switch
from slicetel.domain.types import PathSpec


def chain(n_hops: int, thresholds: dict, *, path_id: int = 7, table=IdealTable, **kw):
    """``n_hops`` switches on one registered path with thresholds deployed."""
    path = PathSpec(path_id, tuple(range(1, n_hops + 1)), tuple([1] * n_hops))
    switches = [Switch(i + 1, table(), **kw) for i in range(n_hops)]
    for sw in switches:
        sw.register_path(path)
        sw.deploy(thresholds)
    return path, switches


def preinstall(switches, slice_id: int, path_id: int) -> None:
    """Warm entries so the first packet is not a forced table miss."""
    for sw in switches:
        sw.table.insert(sw.key_for(slice_id, path_id))


@pytest.fixture
def small_bal():
    from slicetel.domain import make_workload, three_tier

    return make_workload("BAL", 6, 5, topology=three_tier())
