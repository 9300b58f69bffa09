"""Three-tier transport topology with per-tier capacity ratios."""

from __future__ import annotations

from dataclasses import dataclass, replace

from slicetel.errors import ConfigError

ACCESS, AGGREGATION, CORE = "access", "aggregation", "core"
TIERS = (ACCESS, AGGREGATION, CORE)
DEFAULT_TIER_RATIOS = {ACCESS: 25.0, AGGREGATION: 40.0, CORE: 100.0}

HOST = -1  # destination of a host-facing egress port


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    capacity_bps: float
    prop_delay_ns: int
    tier: str


class Topology:
    """Switches, directed links and the port numbering derived from them.

    Port 0 of an access switch faces hosts; the remaining ports of every
    switch are its outgoing links ordered by neighbour id.
    """

    def __init__(self, switches, tiers, links, tier_ratios=None):
        self.switches = list(switches)
        self.tiers = dict(tiers)
        self.links = list(links)
        self.tier_ratios = dict(tier_ratios or DEFAULT_TIER_RATIOS)
        for s in self.switches:
            if not 0 <= s < 1024:
                raise ConfigError(f"switch id {s} does not fit the 10-bit node id", ["switches"])
            if self.tiers.get(s) not in TIERS:
                raise ConfigError(f"switch {s} has no valid tier label", ["tiers"])
        self._ports: dict[int, list[Link]] = {s: [] for s in self.switches}
        for link in self.links:
            if link.src not in self._ports:
                raise ConfigError(f"link from unknown switch {link.src}", ["links"])
            self._ports[link.src].append(link)
        for s, out in self._ports.items():
            out.sort(key=lambda l: (l.dst != HOST, l.dst))

    def ports(self, switch: int) -> list[Link]:
        return self._ports[switch]

    def port_of(self, src: int, dst: int) -> int:
        for i, link in enumerate(self._ports[src]):
            if link.dst == dst:
                return i
        raise ConfigError(f"no link {src} -> {dst}")

    def link(self, switch: int, port: int) -> Link:
        return self._ports[switch][port]

    def path_ports(self, hops) -> tuple[int, ...]:
        hops = tuple(hops)
        nxt = hops[1:] + (HOST,)
        return tuple(self.port_of(a, b) for a, b in zip(hops, nxt))

    def by_tier(self, tier: str) -> list[int]:
        return [s for s in self.switches if self.tiers[s] == tier]

    def neighbours(self, s: int, tier: str) -> list[int]:
        return [l.dst for l in self._ports[s] if l.dst != HOST and self.tiers[l.dst] == tier]

    def routes(self, src: int, dst: int) -> list[tuple[int, ...]]:
        """Equal-cost up/down routes between two access switches."""
        if src == dst:
            return [(src,)]
        up_a = self.neighbours(src, AGGREGATION)
        up_b = self.neighbours(dst, AGGREGATION)
        shared = sorted(set(up_a) & set(up_b))
        if shared:
            return [(src, g, dst) for g in shared]
        out = []
        for ga in up_a:
            for gb in up_b:
                for c in sorted(set(self.neighbours(ga, CORE)) & set(self.neighbours(gb, CORE))):
                    out.append((src, ga, c, gb, dst))
        if not out:
            raise ConfigError(f"no route between access switches {src} and {dst}")
        return out

    def with_unit_capacity(self, unit_bps: float) -> "Topology":
        links = [replace(l, capacity_bps=self.tier_ratios[l.tier] * unit_bps) for l in self.links]
        return Topology(self.switches, self.tiers, links, self.tier_ratios)

    def scaled(self, factor: float) -> "Topology":
        links = [replace(l, capacity_bps=l.capacity_bps / factor) for l in self.links]
        return Topology(self.switches, self.tiers, links, self.tier_ratios)

    def to_dict(self) -> dict:
        return {
            "tier_ratios": dict(self.tier_ratios),
            "switches": [{"id": s, "tier": self.tiers[s]} for s in self.switches],
            "links": [
                {
                    "src": l.src,
                    "dst": l.dst,
                    "capacity_bps": l.capacity_bps,
                    "prop_delay_ns": l.prop_delay_ns,
                    "tier": l.tier,
                }
                for l in self.links
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        try:
            switches = [int(s["id"]) for s in d["switches"]]
            tiers = {int(s["id"]): s["tier"] for s in d["switches"]}
            links = [
                Link(int(l["src"]), int(l["dst"]), float(l["capacity_bps"]), int(l["prop_delay_ns"]), l["tier"])
                for l in d["links"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed topology: {exc}", ["topology"]) from exc
        return cls(switches, tiers, links, d.get("tier_ratios"))


def three_tier(
    n_access: int = 8,
    n_aggregation: int = 4,
    n_core: int = 2,
    unit_bps: float = 1e9,
    prop_delay_ns: int = 5_000,
    tier_ratios: dict | None = None,
) -> Topology:
    """Access switches pair up under aggregation switches, which dual-home to every core.

    With the default unit of 1 Gbps the capacities are 25/40/100 Gbps.
    """
    if n_access < 1 or n_aggregation < 1 or n_core < 1:
        raise ConfigError("each tier needs at least one switch")
    ratios = dict(tier_ratios or DEFAULT_TIER_RATIOS)
    access = list(range(n_access))
    agg = list(range(n_access, n_access + n_aggregation))
    core = list(range(n_access + n_aggregation, n_access + n_aggregation + n_core))
    tiers = {s: ACCESS for s in access} | {s: AGGREGATION for s in agg} | {s: CORE for s in core}
    links = []

    def both(a, b, tier):
        cap = ratios[tier] * unit_bps
        links.append(Link(a, b, cap, prop_delay_ns, tier))
        links.append(Link(b, a, cap, prop_delay_ns, tier))

    for a in access:
        both(a, agg[a * n_aggregation // n_access], ACCESS)
        links.append(Link(a, HOST, ratios[ACCESS] * unit_bps, prop_delay_ns, ACCESS))
    for g in agg:
        for c in core:
            both(g, c, AGGREGATION)
    for i, c in enumerate(core):
        for c2 in core[i + 1:]:
            both(c, c2, CORE)
    return Topology(access + agg + core, tiers, links, ratios)


def offered_load(topology: Topology, slices) -> dict[tuple[int, int], float]:
    """Mean offered bits/s per (switch, port), splitting slice traffic evenly across paths."""
    load: dict[tuple[int, int], float] = {}
    for s in slices:
        if not s.paths:
            continue
        share = s.traffic.total_rate_bps / len(s.paths)
        for p in s.paths:
            for node, port in zip(p.hops, p.ports):
                load[(node, port)] = load.get((node, port), 0.0) + share
    return load


def calibrate_capacities(topology: Topology, slices, target_utilization: float) -> Topology:
    """Rescale every tier (keeping the ratios) so the busiest port runs at the target load."""
    if not 0 < target_utilization < 1:
        raise ConfigError("target utilization must lie in (0, 1)", ["target_utilization"])
    load = offered_load(topology, slices)
    if not load:
        return topology
    need = max(
        bits / topology.tier_ratios[topology.link(node, port).tier] for (node, port), bits in load.items()
    )
    return topology.with_unit_capacity(need / target_utilization)
