"""Per-slice packet arrival streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from slicetel.domain.types import SliceSpec

NS_PER_S = 1_000_000_000


@dataclass(frozen=True)
class OnOff:
    """Alternating ON/OFF periods (seconds); packets generated during OFF are discarded."""

    on_s: float
    off_s: float

    def mask(self, t_ns: np.ndarray) -> np.ndarray:
        period = (self.on_s + self.off_s) * NS_PER_S
        return (t_ns % period) < self.on_s * NS_PER_S


@dataclass
class PacketStream:
    """Arrival-ordered packets of one slice."""

    slice_id: int
    t_ns: np.ndarray  # generation times
    size: np.ndarray  # payload bytes
    path: np.ndarray  # index into the slice's path list
    user: np.ndarray

    def __len__(self):
        return len(self.t_ns)


def gen_traffic(
    slice_: SliceSpec,
    seed,
    duration_s: float,
    *,
    scale: float = 1.0,
    onoff: OnOff | None = None,
    max_packets: int = 20_000_000,
) -> PacketStream:
    """Poisson arrivals for every user of the slice, merged into one stream.

    Each user sends at ``rate_mbps / scale``; the superposition is a Poisson
    process at the aggregate packet rate, with each packet attributed to a
    uniformly chosen user. Users are spread round-robin over the slice's
    paths and packet sizes are uniform integers over the profile's range.
    """
    tp = slice_.traffic
    rate = tp.packet_rate / scale  # packets per second
    empty = np.zeros(0, dtype=np.int64)
    if rate <= 0 or duration_s <= 0 or tp.users <= 0:
        return PacketStream(slice_.slice_id, empty, empty, empty, empty)
    rng = np.random.default_rng(seed)
    expected = rate * duration_s
    if expected > max_packets:
        raise ValueError(f"slice {slice_.slice_id}: {expected:.0f} packets exceeds max_packets; raise the scale")
    n = int(expected + 6 * np.sqrt(expected) + 16)
    gaps = rng.exponential(NS_PER_S / rate, n)
    t = np.cumsum(gaps)
    while t[-1] < duration_s * NS_PER_S:
        more = np.cumsum(rng.exponential(NS_PER_S / rate, n)) + t[-1]
        t = np.concatenate([t, more])
    t = t[t < duration_s * NS_PER_S].astype(np.int64)
    lo, hi = tp.packet_bytes
    size = rng.integers(lo, hi + 1, size=t.size)
    user = rng.integers(0, tp.users, size=t.size)
    if onoff is not None:
        keep = onoff.mask(t)
        t, size, user = t[keep], size[keep], user[keep]
    n_paths = max(1, len(slice_.paths))
    return PacketStream(slice_.slice_id, t, size.astype(np.int64), (user % n_paths).astype(np.int64), user)
