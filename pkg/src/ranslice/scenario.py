"""Slice catalog, NF processing profiles and randomized experiment scenarios."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path as FsPath
from typing import Mapping, Sequence

import jsonschema

from .costs import DEFAULT_PIECEWISE, PiecewiseCost
from .topology import (NF_TYPES, NetworkGraph, Path, Tier, admissible_paths, load_topology, ms_to_s, s_to_ms,
                       serialize_topology)


class ServiceClass(str, Enum):
    URLLC = "URLLC"
    EMBB = "eMBB"
    MMTC = "mMTC"


@dataclass(frozen=True)
class SliceType:
    name: str
    service_class: ServiceClass
    bandwidth: float  # Mbps per demand
    max_delay: float  # seconds
    ran_isolation: bool

    def __post_init__(self):
        if self.bandwidth <= 0 or self.max_delay <= 0:
            raise ValueError(f"slice type {self.name}: bandwidth and max_delay must be positive")


@dataclass(frozen=True)
class NFProfile:
    nf_type: str
    load_ratio: float
    d_proq: float
    d_pro_min: float
    d_prox: float
    d_pro_max: float

    def __post_init__(self):
        if self.load_ratio <= 0:
            raise ValueError(f"{self.nf_type}: load ratio must be positive")
        if min(self.d_proq, self.d_pro_min, self.d_prox, self.d_pro_max) < 0:
            raise ValueError(f"{self.nf_type}: delays must be non-negative")
        if self.d_pro_min > self.d_pro_max:
            raise ValueError(f"{self.nf_type}: d_pro_min exceeds d_pro_max")


@dataclass(frozen=True)
class Demand:
    id: str
    rate: float  # Mbps

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"demand {self.id}: rate must be positive")


@dataclass(frozen=True)
class SliceRequest:
    id: str
    slice_type: SliceType
    source: str
    demands: tuple[Demand, ...]
    admissible_paths: tuple[Path, ...]
    nf_chain: tuple[str, ...] = NF_TYPES
    campus: str | None = None

    def __post_init__(self):
        if tuple(self.nf_chain) != NF_TYPES:
            raise ValueError(f"slice {self.id}: NF chain must be RU, DU, CU")
        if not self.demands:
            raise ValueError(f"slice {self.id}: needs at least one demand")
        for p in self.admissible_paths:
            if p.site_seq[0] != self.source:
                raise ValueError(f"slice {self.id}: path {p.id} does not start at {self.source}")

    @property
    def service_class(self) -> ServiceClass:
        return self.slice_type.service_class

    @property
    def max_delay(self) -> float:
        return self.slice_type.max_delay

    @property
    def total_rate(self) -> float:
        return sum(d.rate for d in self.demands)

    def path(self, path_id: str) -> Path:
        for p in self.admissible_paths:
            if p.id == path_id:
                return p
        raise KeyError(f"slice {self.id} has no admissible path {path_id!r}")


_MBPS_PER_GBPS = 1000.0

CATALOG: tuple[SliceType, ...] = (
    SliceType("URLLC_RO1", ServiceClass.URLLC, 4.0, 1e-3, True),
    SliceType("URLLC_RO2", ServiceClass.URLLC, 25.0, 1e-3, True),
    SliceType("URLLC_AW1", ServiceClass.URLLC, 100.0, 1e-3, True),
    SliceType("URLLC_AW2", ServiceClass.URLLC, 1 * _MBPS_PER_GBPS, 1e-3, True),
    SliceType("eMBB1", ServiceClass.EMBB, 10 * _MBPS_PER_GBPS, 4e-3, False),
    SliceType("eMBB2", ServiceClass.EMBB, 20 * _MBPS_PER_GBPS, 4e-3, False),
    SliceType("mMTC1", ServiceClass.MMTC, 1.0, 15e-3, False),
    SliceType("mMTC2", ServiceClass.MMTC, 2.0, 15e-3, False),
)


def builtin_slice_catalog() -> list[SliceType]:
    return list(CATALOG)


def builtin_nf_profiles() -> dict[str, NFProfile]:
    ms = ms_to_s
    return {
        "RU": NFProfile("RU", 2.16, ms(0.10), ms(0.01), ms(0.10), ms(0.5)),
        "DU": NFProfile("DU", 1.44, ms(0.20), ms(0.02), ms(0.20), ms(0.5)),
        "CU": NFProfile("CU", 0.9, ms(0.25), ms(0.02), ms(0.20), ms(0.5)),
    }


@dataclass(frozen=True)
class Scenario:
    graph: NetworkGraph
    slices: tuple[SliceRequest, ...]
    alpha: float = 0.98
    piecewise: PiecewiseCost = DEFAULT_PIECEWISE
    nf_profiles: Mapping[str, NFProfile] = field(default_factory=builtin_nf_profiles)
    seed: int = 0
    k_paths: int = 3
    demands_per_slice: int = 1
    demand_scale: float = 1.0
    queue_weighting: str = "count"  # or "rate"
    link_load_scope: str = "to_cu"  # or "full_path"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ScenarioError(f"alpha={self.alpha} outside [0, 1]", "alpha")
        if self.queue_weighting not in ("count", "rate"):
            raise ScenarioError(f"unknown queue_weighting {self.queue_weighting!r}", "queue_weighting")
        if self.link_load_scope not in ("to_cu", "full_path"):
            raise ScenarioError(f"unknown link_load_scope {self.link_load_scope!r}", "link_load_scope")
        for t in NF_TYPES:
            if t not in self.nf_profiles:
                raise ScenarioError(f"missing NF profile for {t}", f"nf_profiles/{t}")
        ids = [s.id for s in self.slices]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate slice ids", "slices")
        for s in self.slices:
            if s.source not in self.graph.sites or self.graph.sites[s.source].tier != Tier.CS:
                raise ScenarioError(f"slice {s.id}: source {s.source!r} is not a tier-0 site", f"slices/{s.id}")
            for p in s.admissible_paths:
                if any(l not in self.graph.links for l in p.link_seq):
                    raise ScenarioError(f"slice {s.id}: path {p.id} leaves the graph", f"slices/{s.id}")

    def slice(self, slice_id: str) -> SliceRequest:
        for s in self.slices:
            if s.id == slice_id:
                return s
        raise KeyError(slice_id)

    def with_slices(self, slices: Sequence[SliceRequest]) -> "Scenario":
        return replace(self, slices=tuple(slices))


class ScenarioError(ValueError):
    def __init__(self, message: str, field_path: str = ""):
        super().__init__(message)
        self.field_path = field_path


def _make_slice(graph, sid, stype, source, k, n_demands, scale, path_cache, campus=None, demands=None):
    if source not in path_cache:
        path_cache[source] = tuple(admissible_paths(graph, source, k))
    if demands is None:
        demands = tuple(Demand(f"{sid}.d{j}", stype.bandwidth * scale) for j in range(n_demands))
    return SliceRequest(sid, stype, source, tuple(demands), path_cache[source], campus=campus)


def generate_scenario(graph: NetworkGraph, n_slices: int, seed: int, k: int = 3, demands_per_slice: int = 1,
                      demand_scale: float = 1.0, **options) -> Scenario:
    """Uniform source CS and uniform slice type per slice, drawn slice by slice so a smaller
    scenario is a prefix of a larger one with the same seed."""
    if n_slices < 0:
        raise ValueError("n_slices must be >= 0")
    cells = graph.sites_in_tier(Tier.CS)
    if not cells or not graph.sites_in_tier(Tier.CORE):
        raise ScenarioError("graph needs tier-0 and tier-3 sites", "graph")
    rng = random.Random(seed)
    cache: dict = {}
    catalog = options.pop("catalog", CATALOG)
    slices = []
    for i in range(n_slices):
        source = rng.choice(cells)
        stype = rng.choice(catalog)
        slices.append(_make_slice(graph, f"s{i:03d}", stype, source, k, demands_per_slice, demand_scale, cache))
    return Scenario(graph, tuple(slices), seed=seed, k_paths=k, demands_per_slice=demands_per_slice,
                    demand_scale=demand_scale, **options)


# ---------------------------------------------------------------------------
# documents

_NUM = {"type": "number"}
SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "topology": {"type": "object"},
        "topology_file": {"type": "string"},
        "alpha": {"type": "number"},
        "seed": {"type": "integer"},
        "k_paths": {"type": "integer", "minimum": 1},
        "n_slices": {"type": "integer", "minimum": 0},
        "demands_per_slice": {"type": "integer", "minimum": 1},
        "demand_scale": {"type": "number", "exclusiveMinimum": 0},
        "queue_weighting": {"enum": ["count", "rate"]},
        "link_load_scope": {"enum": ["to_cu", "full_path"]},
        "slice_types": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "service_class", "bandwidth_mbps", "max_delay_ms"],
                "properties": {
                    "name": {"type": "string"},
                    "service_class": {"enum": [c.value for c in ServiceClass]},
                    "bandwidth_mbps": _NUM,
                    "max_delay_ms": _NUM,
                    "ran_isolation": {"type": "boolean"},
                },
            },
        },
        "slices": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "source"],
                "properties": {
                    "id": {"type": "string"},
                    "type": {"type": "string"},
                    "source": {"type": "string"},
                    "campus": {"type": ["string", "null"]},
                    "demands": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "object", "required": ["id", "rate_mbps"],
                                  "properties": {"id": {"type": "string"}, "rate_mbps": _NUM}},
                    },
                },
            },
        },
        "nf_profiles": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {k: _NUM for k in ("load_ratio", "d_proq_ms", "d_pro_min_ms", "d_prox_ms", "d_pro_max_ms")},
            },
        },
        "piecewise": {
            "type": "object",
            "required": ["segments"],
            "properties": {
                "segments": {"type": "array", "minItems": 1,
                             "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NUM}},
                "u_max": _NUM,
            },
        },
    },
}


def load_scenario(doc: Mapping | str, base_dir: str | None = None) -> Scenario:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {e.message}", where) from None

    if "topology" in doc:
        graph = load_topology(doc["topology"])
    elif "topology_file" in doc:
        path = FsPath(doc["topology_file"])
        if base_dir and not path.is_absolute():
            path = FsPath(base_dir) / path
        graph = load_topology(json.loads(path.read_text()))
    else:
        from .topology import generate_default_topology
        graph = generate_default_topology()

    alpha = doc.get("alpha", 0.98)
    if not 0.0 <= alpha <= 1.0:
        raise ScenarioError(f"alpha={alpha} outside [0, 1]", "alpha")

    profiles = builtin_nf_profiles()
    for t, spec in doc.get("nf_profiles", {}).items():
        if t not in profiles:
            raise ScenarioError(f"unknown NF type {t!r}", f"nf_profiles/{t}")
        base = profiles[t]
        profiles[t] = NFProfile(
            t,
            spec.get("load_ratio", base.load_ratio),
            ms_to_s(spec.get("d_proq_ms", s_to_ms(base.d_proq))),
            ms_to_s(spec.get("d_pro_min_ms", s_to_ms(base.d_pro_min))),
            ms_to_s(spec.get("d_prox_ms", s_to_ms(base.d_prox))),
            ms_to_s(spec.get("d_pro_max_ms", s_to_ms(base.d_pro_max))),
        )
    piecewise = DEFAULT_PIECEWISE
    if "piecewise" in doc:
        pw = doc["piecewise"]
        try:
            piecewise = PiecewiseCost(tuple((float(a), float(b)) for a, b in pw["segments"]), pw.get("u_max", 1.0))
        except ValueError as e:
            raise ScenarioError(str(e), "piecewise") from None

    types = {t.name: t for t in CATALOG}
    for t in doc.get("slice_types", []):
        types[t["name"]] = SliceType(t["name"], ServiceClass(t["service_class"]), float(t["bandwidth_mbps"]),
                                     ms_to_s(t["max_delay_ms"]), t.get("ran_isolation", False))

    opts = dict(alpha=alpha, piecewise=piecewise, nf_profiles=profiles,
                queue_weighting=doc.get("queue_weighting", "count"),
                link_load_scope=doc.get("link_load_scope", "to_cu"))
    seed = doc.get("seed", 0)
    k = doc.get("k_paths", 3)
    dps = doc.get("demands_per_slice", 1)
    scale = doc.get("demand_scale", 1.0)

    if "slices" in doc:
        cache: dict = {}
        slices = []
        for i, s in enumerate(doc["slices"]):
            if s["type"] not in types:
                raise ScenarioError(f"unknown slice type {s['type']!r}", f"slices/{i}/type")
            if s["source"] not in graph.sites:
                raise ScenarioError(f"unknown source site {s['source']!r}", f"slices/{i}/source")
            if graph.sites[s["source"]].tier != Tier.CS:
                raise ScenarioError(f"source {s['source']!r} is not a tier-0 site", f"slices/{i}/source")
            sid = s.get("id", f"s{i:03d}")
            demands = None
            if "demands" in s:
                demands = tuple(Demand(d["id"], float(d["rate_mbps"])) for d in s["demands"])
            slices.append(_make_slice(graph, sid, types[s["type"]], s["source"], k, dps, scale, cache,
                                      campus=s.get("campus"), demands=demands))
        return Scenario(graph, tuple(slices), seed=seed, k_paths=k, demands_per_slice=dps, demand_scale=scale, **opts)

    return generate_scenario(graph, doc.get("n_slices", 0), seed, k, dps, scale,
                             catalog=tuple(types[n] for n in types), **opts)


def save_scenario(scenario: Scenario) -> dict:
    custom = [t for t in {s.slice_type for s in scenario.slices} if t not in CATALOG]
    return {
        "topology": serialize_topology(scenario.graph),
        "alpha": scenario.alpha,
        "seed": scenario.seed,
        "k_paths": scenario.k_paths,
        "demands_per_slice": scenario.demands_per_slice,
        "demand_scale": scenario.demand_scale,
        "queue_weighting": scenario.queue_weighting,
        "link_load_scope": scenario.link_load_scope,
        "slice_types": [
            {"name": t.name, "service_class": t.service_class.value, "bandwidth_mbps": t.bandwidth,
             "max_delay_ms": s_to_ms(t.max_delay), "ran_isolation": t.ran_isolation}
            for t in sorted(custom, key=lambda t: t.name)
        ],
        "slices": [
            {"id": s.id, "type": s.slice_type.name, "source": s.source, "campus": s.campus,
             "demands": [{"id": d.id, "rate_mbps": d.rate} for d in s.demands]}
            for s in scenario.slices
        ],
        "nf_profiles": {
            t: {"load_ratio": p.load_ratio, "d_proq_ms": s_to_ms(p.d_proq), "d_pro_min_ms": s_to_ms(p.d_pro_min),
                "d_prox_ms": s_to_ms(p.d_prox), "d_pro_max_ms": s_to_ms(p.d_pro_max)}
            for t, p in scenario.nf_profiles.items()
        },
        "piecewise": {"segments": [list(s) for s in scenario.piecewise.segments], "u_max": scenario.piecewise.u_max},
    }
