"""d hash-indexed arrays of w buckets holding per-key telemetry state."""

from __future__ import annotations

from slicetel.dataplane.hashing import HashFamily

N_METRICS = 3


class BucketEntry:
    """Telemetry state for one (slice_id, path_id, output_port) key.

    Per metric (indexed latency, jitter, loss) it keeps the end-to-end
    estimate inherited from upstream (``e_prev``), the last value this
    switch reported (``e_rep``), the value computed for the most recent
    packet (``e_last``) and the metric's auxiliary value (``v_aux``).
    """

    __slots__ = ("key", "e_prev", "e_rep", "e_last", "v_aux", "seen", "f_tm", "loss_hop")

    def __init__(self, key):
        self.key = key
        self.e_prev = [0] * N_METRICS
        self.e_rep = [0] * N_METRICS
        self.e_last = [0] * N_METRICS
        self.v_aux = [0] * N_METRICS
        self.seen = False  # whether any packet has been processed since (re)initialisation
        self.f_tm = False
        self.loss_hop = 0  # per-hop loss count derived from the last upstream counter report

    def __repr__(self):
        return (
            f"BucketEntry(key={self.key}, e_prev={self.e_prev}, e_rep={self.e_rep}, "
            f"e_last={self.e_last}, v_aux={self.v_aux}, f_tm={self.f_tm})"
        )


class BucketArrays:
    """Storage of ``d x w`` entries; lookup inspects exactly one slot per array."""

    def __init__(self, d: int = 2, w: int = 4096, seed: int = 0):
        self.hashes = HashFamily(d, w, seed)
        self.d = d
        self.w = w
        self.slots: list[list[BucketEntry | None]] = [[None] * w for _ in range(d)]
        self._index_cache: dict = {}
        self.occupancy = 0

    def indices(self, key) -> tuple[int, ...]:
        idx = self._index_cache.get(key)
        if idx is None:
            idx = self._index_cache[key] = self.hashes.indices(key)
        return idx

    def lookup(self, key) -> BucketEntry | None:
        """Entry stored under ``key``, scanning arrays in index order; ``None`` on a miss."""
        idx = self.indices(key)
        for i in range(self.d):
            entry = self.slots[i][idx[i]]
            if entry is not None and entry.key == key:
                return entry
        return None

    def insert(self, key) -> tuple[BucketEntry, object]:
        """Fresh entry for ``key``; returns it with the evicted key (or ``None``).

        The first empty candidate slot is used; when all ``d`` are taken the
        occupant of array 0's slot is overwritten.
        """
        idx = self.indices(key)
        entry = BucketEntry(key)
        for i in range(self.d):
            if self.slots[i][idx[i]] is None:
                self.slots[i][idx[i]] = entry
                self.occupancy += 1
                return entry, None
        victim = self.slots[0][idx[0]]
        self.slots[0][idx[0]] = entry
        return entry, victim.key

    def entries(self):
        for row in self.slots:
            for entry in row:
                if entry is not None:
                    yield entry

    def clear(self) -> None:
        self.slots = [[None] * self.w for _ in range(self.d)]
        self.occupancy = 0
