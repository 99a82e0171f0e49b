"""Multi-tier transport network: sites, servers, directed links and path enumeration."""

from __future__ import annotations

import heapq
import json
import math
import random
from collections import deque
from decimal import Decimal
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping

import jsonschema

NF_TYPES = ("RU", "DU", "CU")

# integer picoseconds, so equal-delay routes compare equal regardless of summation order
_DELAY_QUANTUM = 1e-12


class Tier(IntEnum):
    CS = 0
    EDGE = 1
    REGIONAL = 2
    CORE = 3

    @property
    def label(self) -> str:
        return ("CellSite", "EdgeCloud", "RegionalCloud", "CoreCloud")[self.value]


class TopologyError(ValueError):
    """Invalid topology; ``element`` names the offending site, server or link id."""

    def __init__(self, message: str, element: str | None = None):
        super().__init__(message)
        self.element = element


@dataclass(frozen=True)
class Server:
    id: str
    site_id: str
    capacity: float
    proq_capacity: Mapping[str, float]


@dataclass(frozen=True)
class Site:
    id: str
    tier: Tier
    server_ids: tuple[str, ...]


@dataclass(frozen=True)
class Link:
    id: str
    src: str
    dst: str
    capacity: float  # Mbps
    delay: float  # seconds
    physical_id: str


@dataclass(frozen=True)
class Path:
    id: str
    site_seq: tuple[str, ...]
    link_seq: tuple[str, ...]
    server_seq: tuple[str, ...]
    delay: float

    @property
    def hops(self) -> int:
        return len(self.link_seq)

    def traverses(self, link_id: str) -> bool:
        return link_id in self.link_seq

    def connects(self, n: str, m: str) -> bool:
        """Whether the path has a link n->m (the unused T_p^{n,m} indicator)."""
        for a, b in zip(self.site_seq, self.site_seq[1:]):
            if a == n and b == m:
                return True
        return False

    def site_index(self, site_id: str) -> int | None:
        try:
            return self.site_seq.index(site_id)
        except ValueError:
            return None


class NetworkGraph:
    """Immutable site/server/link graph. Validates on construction."""

    def __init__(self, sites: Iterable[Site], servers: Iterable[Server], links: Iterable[Link]):
        self.sites: dict[str, Site] = {}
        self.servers: dict[str, Server] = {}
        self.links: dict[str, Link] = {}
        for s in sites:
            if s.id in self.sites:
                raise TopologyError(f"duplicate site id {s.id!r}", s.id)
            self.sites[s.id] = s
        for x in servers:
            if x.id in self.servers:
                raise TopologyError(f"duplicate server id {x.id!r}", x.id)
            if x.site_id not in self.sites:
                raise TopologyError(f"server {x.id!r} references unknown site {x.site_id!r}", x.site_id)
            if x.capacity <= 0:
                raise TopologyError(f"server {x.id!r} has non-positive capacity", x.id)
            for t in NF_TYPES:
                if x.proq_capacity.get(t, 0) <= 0:
                    raise TopologyError(f"server {x.id!r} lacks positive proq capacity for {t}", x.id)
            self.servers[x.id] = x
        for s in self.sites.values():
            for xid in s.server_ids:
                if xid not in self.servers or self.servers[xid].site_id != s.id:
                    raise TopologyError(f"site {s.id!r} lists unknown server {xid!r}", xid)
        hosted = {xid for s in self.sites.values() for xid in s.server_ids}
        for xid in self.servers:
            if xid not in hosted:
                raise TopologyError(f"server {xid!r} not listed by its site", xid)

        self._out: dict[str, list[Link]] = {sid: [] for sid in self.sites}
        self._pair: dict[tuple[str, str], Link] = {}
        for link in links:
            if link.id in self.links:
                raise TopologyError(f"duplicate link id {link.id!r}", link.id)
            for end in (link.src, link.dst):
                if end not in self.sites:
                    raise TopologyError(f"link {link.id!r} references unknown site {end!r}", end)
            if link.src == link.dst:
                raise TopologyError(f"link {link.id!r} is a self-loop", link.id)
            if link.capacity <= 0 or link.delay < 0:
                raise TopologyError(f"link {link.id!r} has invalid capacity/delay", link.id)
            if (link.src, link.dst) in self._pair:
                raise TopologyError(f"parallel link {link.id!r} between {link.src} and {link.dst}", link.id)
            self.links[link.id] = link
            self._pair[(link.src, link.dst)] = link
            self._out[link.src].append(link)
        for lst in self._out.values():
            lst.sort(key=lambda l: l.dst)

        cores = set(self.sites_in_tier(Tier.CORE))
        for cs in self.sites_in_tier(Tier.CS):
            if not cores & self._reachable(cs):
                raise TopologyError(f"cell site {cs!r} cannot reach any core site", cs)

    def _reachable(self, src: str) -> set[str]:
        seen = {src}
        todo = deque([src])
        while todo:
            n = todo.popleft()
            for link in self._out[n]:
                if link.dst not in seen:
                    seen.add(link.dst)
                    todo.append(link.dst)
        return seen

    def __eq__(self, other) -> bool:
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return (
            list(self.sites.values()) == list(other.sites.values())
            and list(self.servers.values()) == list(other.servers.values())
            and list(self.links.values()) == list(other.links.values())
        )

    def __repr__(self) -> str:
        return f"NetworkGraph(sites={len(self.sites)}, servers={len(self.servers)}, links={len(self.links)})"

    def out_links(self, site_id: str) -> list[Link]:
        return self._out[site_id]

    def link_between(self, src: str, dst: str) -> Link | None:
        return self._pair.get((src, dst))

    def sites_in_tier(self, tier: int) -> list[str]:
        return sorted(s.id for s in self.sites.values() if s.tier == tier)

    def servers_at(self, site_id: str) -> tuple[str, ...]:
        return self.sites[site_id].server_ids

    def tier_of_server(self, server_id: str) -> Tier:
        return self.sites[self.servers[server_id].site_id].tier

    def physical_links(self) -> list[str]:
        return sorted({l.physical_id for l in self.links.values()})

    def make_path(self, site_seq: Iterable[str]) -> Path:
        site_seq = tuple(site_seq)
        links = []
        for a, b in zip(site_seq, site_seq[1:]):
            link = self.link_between(a, b)
            if link is None:
                raise TopologyError(f"no link {a}->{b}", a)
            links.append(link)
        if len(set(site_seq)) != len(site_seq):
            raise TopologyError("path repeats a site", site_seq[0])
        servers = tuple(x for s in site_seq for x in self.sites[s].server_ids)
        delay = math.fsum(l.delay for l in links)
        return Path(">".join(site_seq), site_seq, tuple(l.id for l in links), servers, delay)


def ms_to_s(ms: float) -> float:
    return float(Decimal(repr(float(ms))).scaleb(-3))


def s_to_ms(s: float) -> float:
    return float(Decimal(repr(float(s))).scaleb(3))


def _quantize(delay: float) -> int:
    return round(delay / _DELAY_QUANTUM)


# ---------------------------------------------------------------------------
# path enumeration


def _best_path(graph, source, target, banned_nodes, banned_edges):
    # labels (delay, hops, site sequence) are totally ordered and extension-monotone
    heap = [(0, 0, (source,))]
    settled = set()
    while heap:
        d, h, seq = heapq.heappop(heap)
        node = seq[-1]
        if node in settled:
            continue
        settled.add(node)
        if node == target:
            return d, h, seq
        for link in graph.out_links(node):
            nxt = link.dst
            if nxt in settled or nxt in banned_nodes or (node, nxt) in banned_edges:
                continue
            heapq.heappush(heap, (d + _quantize(link.delay), h + 1, seq + (nxt,)))
    return None


def _path_key(graph, seq):
    d = sum(_quantize(graph.link_between(a, b).delay) for a, b in zip(seq, seq[1:]))
    return (d, len(seq) - 1, seq)


def k_shortest_paths(graph: NetworkGraph, source: str, target: str, k: int) -> list[Path]:
    """Up to ``k`` loop-free paths ordered by (delay, hops, site ids), via Yen's deviation scheme."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if graph.sites[source].tier != Tier.CS:
        raise ValueError(f"source {source!r} is not a tier-0 site")
    first = _best_path(graph, source, target, frozenset(), frozenset())
    if first is None:
        return []
    accepted = [first[2]]
    candidates: list = []
    known = {first[2]}
    while len(accepted) < k:
        prev = accepted[-1]
        for i in range(len(prev) - 1):
            root = prev[: i + 1]
            banned_edges = {(p[i], p[i + 1]) for p in accepted if len(p) > i + 1 and p[: i + 1] == root}
            spur = _best_path(graph, root[-1], target, frozenset(root[:-1]), banned_edges)
            if spur is None:
                continue
            seq = root[:-1] + spur[2]
            if seq not in known:
                known.add(seq)
                heapq.heappush(candidates, _path_key(graph, seq))
        if not candidates:
            break
        accepted.append(heapq.heappop(candidates)[2])
    return [graph.make_path(seq) for seq in accepted]


def admissible_paths(graph: NetworkGraph, source: str, k: int) -> list[Path]:
    """Union of the k shortest paths from ``source`` to every core site, in (delay, hops, ids) order."""
    found = {}
    for core in graph.sites_in_tier(Tier.CORE):
        for p in k_shortest_paths(graph, source, core, k):
            found[p.site_seq] = p
    keys = sorted(found, key=lambda seq: _path_key(graph, seq))
    return [found[s] for s in keys]


# ---------------------------------------------------------------------------
# documents

TOPOLOGY_SCHEMA = {
    "type": "object",
    "required": ["sites", "links"],
    "properties": {
        "sites": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "tier"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "tier": {"type": "integer", "minimum": 0, "maximum": 3},
                    "servers": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "capacity", "proq_capacity"],
                            "properties": {
                                "id": {"type": "string", "minLength": 1},
                                "capacity": {"type": "number", "exclusiveMinimum": 0},
                                "proq_capacity": {
                                    "type": "object",
                                    "required": list(NF_TYPES),
                                    "properties": {t: {"type": "number", "exclusiveMinimum": 0} for t in NF_TYPES},
                                },
                            },
                        },
                    },
                },
            },
        },
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "src", "dst", "capacity_mbps", "delay_ms"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "src": {"type": "string"},
                    "dst": {"type": "string"},
                    "capacity_mbps": {"type": "number", "exclusiveMinimum": 0},
                    "delay_ms": {"type": "number", "minimum": 0},
                    "bidirectional": {"type": "boolean"},
                },
            },
        },
    },
}


def _check_schema(doc, schema):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise TopologyError(f"schema violation at {where}: {e.message}", where) from None


def load_topology(doc: Mapping | str) -> NetworkGraph:
    if isinstance(doc, str):
        doc = json.loads(doc)
    _check_schema(doc, TOPOLOGY_SCHEMA)
    sites, servers, links = [], [], []
    for s in doc["sites"]:
        ids = []
        for x in s.get("servers", []):
            servers.append(Server(x["id"], s["id"], float(x["capacity"]),
                                  {t: float(x["proq_capacity"][t]) for t in NF_TYPES}))
            ids.append(x["id"])
        sites.append(Site(s["id"], Tier(s["tier"]), tuple(ids)))
    for l in doc["links"]:
        cap, delay = float(l["capacity_mbps"]), ms_to_s(l["delay_ms"])
        if l.get("bidirectional", False):
            links.append(Link(f"{l['id']}/f", l["src"], l["dst"], cap, delay, l["id"]))
            links.append(Link(f"{l['id']}/r", l["dst"], l["src"], cap, delay, l["id"]))
        else:
            links.append(Link(l["id"], l["src"], l["dst"], cap, delay, l["id"]))
    return NetworkGraph(sites, servers, links)


def serialize_topology(graph: NetworkGraph) -> dict:
    sites = []
    for s in graph.sites.values():
        sites.append({
            "id": s.id,
            "tier": int(s.tier),
            "servers": [
                {"id": x, "capacity": graph.servers[x].capacity,
                 "proq_capacity": dict(graph.servers[x].proq_capacity)}
                for x in s.server_ids
            ],
        })
    links = []
    emitted = set()
    for l in graph.links.values():
        if l.physical_id in emitted:
            continue
        emitted.add(l.physical_id)
        twin = graph.link_between(l.dst, l.src)
        bidir = (twin is not None and twin.physical_id == l.physical_id
                 and l.id == f"{l.physical_id}/f" and twin.id == f"{l.physical_id}/r")
        links.append({"id": l.physical_id, "src": l.src, "dst": l.dst, "capacity_mbps": l.capacity,
                      "delay_ms": s_to_ms(l.delay), "bidirectional": bidir})
    return {"sites": sites, "links": links}


# ---------------------------------------------------------------------------
# default tiered topology

DEFAULT_TIER_COUNTS = {0: 32, 1: 12, 2: 5, 3: 2}
DEFAULT_SERVERS = {0: (1, 100.0), 1: (2, 300.0), 2: (4, 800.0), 3: (8, 2000.0)}
# per-NF-type queueing capacity; no published values. Tier-0 RU capacity admits three RU
# instances (count weighting, one demand each) before first-fit reports the cell site full.
DEFAULT_PROQ = {
    0: {"RU": 7.0, "DU": 8.0, "CU": 8.0},
    1: {"RU": 40.0, "DU": 24.0, "CU": 24.0},
    2: {"RU": 40.0, "DU": 48.0, "CU": 48.0},
    3: {"RU": 40.0, "DU": 96.0, "CU": 96.0},
}
# (delay ms, capacity Gbps) by link class
DEFAULT_LINKS = {"ring": (0.05, 10), "cs_edge": (0.1, 40), "edge_reg": (0.3, 100), "reg_core": (1.0, 400)}
PREFIX = {0: "CS", 1: "EC", 2: "RC", 3: "CC"}


@dataclass
class TopologyParams:
    tier_counts: dict = field(default_factory=lambda: dict(DEFAULT_TIER_COUNTS))
    ring_size: int = 4
    servers: dict = field(default_factory=lambda: dict(DEFAULT_SERVERS))
    proq: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_PROQ.items()})
    links: dict = field(default_factory=lambda: dict(DEFAULT_LINKS))
    attachments_per_ring: int = 2
    target_links: int | None = 70


def generate_default_topology(tier_counts: Mapping[int, int] | None = None, ring_size: int = 4, seed: int = 1,
                              params: TopologyParams | None = None) -> NetworkGraph:
    """Tiered access/aggregation topology: CS rings homed onto edge clouds, edges onto regionals,
    every regional onto every core. Extra edge->regional links are added to reach ``target_links``."""
    params = params or TopologyParams()
    counts = {int(k): int(v) for k, v in (tier_counts or params.tier_counts).items()}
    if ring_size < 2:
        raise ValueError("ring_size must be >= 2")
    if any(counts.get(t, 0) < 1 for t in range(4)):
        raise ValueError("every tier needs at least one site")
    rng = random.Random(seed)

    sites, servers = [], []
    names = {t: [f"{PREFIX[t]}{i:02d}" for i in range(counts[t])] for t in range(4)}
    for t in range(4):
        n_srv, cap = params.servers[t]
        for sid in names[t]:
            xs = [f"{sid}.x{j}" for j in range(n_srv)]
            for xid in xs:
                servers.append(Server(xid, sid, float(cap), dict(params.proq[t])))
            sites.append(Site(sid, Tier(t), tuple(xs)))

    pairs: list[tuple[str, str, str]] = []  # (src, dst, class)
    cs, edges, regs, cores = names[0], names[1], names[2], names[3]
    rings = [cs[i:i + ring_size] for i in range(0, len(cs), ring_size)]
    for ring in rings:
        if len(ring) == 2:
            pairs.append((ring[0], ring[1], "ring"))
        elif len(ring) > 2:
            pairs.extend((ring[i], ring[(i + 1) % len(ring)], "ring") for i in range(len(ring)))
    edge_order = edges[:]
    rng.shuffle(edge_order)
    slot = 0
    for ring in rings:
        n_att = min(params.attachments_per_ring, len(ring))
        homes = [ring[(i * len(ring)) // n_att] for i in range(n_att)]
        used = set()
        for cs_site in homes:
            edge = edge_order[slot % len(edge_order)]
            slot += 1
            if edge in used:
                continue
            used.add(edge)
            pairs.append((cs_site, edge, "cs_edge"))
    reg_order = regs[:]
    rng.shuffle(reg_order)
    for i, e in enumerate(edges):
        pairs.append((e, reg_order[i % len(reg_order)], "edge_reg"))
    for r in regs:
        for c in cores:
            pairs.append((r, c, "reg_core"))

    if params.target_links is not None:
        existing = {frozenset(p[:2]) for p in pairs}
        extras = [(e, r) for e in edges for r in regs if frozenset((e, r)) not in existing]
        rng.shuffle(extras)
        while len(pairs) < params.target_links and extras:
            e, r = extras.pop()
            pairs.append((e, r, "edge_reg"))
        if len(pairs) != params.target_links:
            raise ValueError(f"cannot reach {params.target_links} bidirectional links (got {len(pairs)})")

    links = []
    for i, (a, b, cls) in enumerate(pairs):
        delay_ms, gbps = params.links[cls]
        pid = f"L{i:03d}"
        links.append(Link(f"{pid}/f", a, b, gbps * 1000.0, ms_to_s(delay_ms), pid))
        links.append(Link(f"{pid}/r", b, a, gbps * 1000.0, ms_to_s(delay_ms), pid))
    return NetworkGraph(sites, servers, links)
