"""Small random scenarios for cross-checking solvers against exhaustive search."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .scenario import Demand, Scenario, ServiceClass, SliceRequest, SliceType
from .topology import Link, NetworkGraph, Server, Site, Tier, admissible_paths, ms_to_s


@dataclass
class ToyParams:
    max_slices: int = 3
    max_demands: int = 2
    k_paths: int = 2
    servers_per_site: tuple[int, int] = (1, 2)
    rates: tuple[float, ...] = (1.0, 4.0, 10.0, 20.0, 40.0)
    budgets_ms: tuple[float, ...] = (0.6, 1.0, 4.0, 15.0)


_CAPS = {0: (80, 200), 1: (100, 300), 2: (200, 600), 3: (500, 2000)}


def toy_graph(rng: random.Random, params: ToyParams) -> NetworkGraph:
    """One or two cell sites homed on one or two edge sites, then a regional and a core site; random capacities."""
    n_cs = rng.randint(1, 2)
    n_edge = rng.randint(1, 2)
    names = {0: [f"CS{i}" for i in range(n_cs)], 1: [f"EC{i}" for i in range(n_edge)], 2: ["RC0"], 3: ["CC0"]}
    sites, servers = [], []
    for t, ids in names.items():
        for sid in ids:
            lo, hi = params.servers_per_site
            n = 1 if t == 0 else rng.randint(lo, hi)
            xs = tuple(f"{sid}.x{j}" for j in range(n))
            for x in xs:
                proq = {nf: float(rng.choice((5, 10, 20, 50))) for nf in ("RU", "DU", "CU")}
                servers.append(Server(x, sid, float(rng.randint(*_CAPS[t])), proq))
            sites.append(Site(sid, Tier(t), xs))
    pairs = []
    if n_cs == 2:
        pairs.append(("CS0", "CS1"))
    pairs.append(("CS0", "EC0"))
    if n_cs == 2:
        pairs.append(("CS1", names[1][-1]) if n_edge == 2 else ("CS1", "EC0"))
    pairs.extend((e, "RC0") for e in names[1])
    pairs.append(("RC0", "CC0"))
    links = []
    for i, (a, b) in enumerate(dict.fromkeys(pairs)):
        cap = float(rng.choice((60, 150, 400, 1000)))
        delay = ms_to_s(rng.choice((0.02, 0.05, 0.1, 0.3)))
        links.append(Link(f"T{i}/f", a, b, cap, delay, f"T{i}"))
        links.append(Link(f"T{i}/r", b, a, cap, delay, f"T{i}"))
    return NetworkGraph(sites, servers, links)


def make_toy_scenario(seed: int, params: ToyParams | None = None, **options) -> Scenario:
    params = params or ToyParams()
    rng = random.Random(seed)
    g = toy_graph(rng, params)
    cells = g.sites_in_tier(Tier.CS)
    classes = {0.6: ServiceClass.URLLC, 1.0: ServiceClass.URLLC, 4.0: ServiceClass.EMBB, 15.0: ServiceClass.MMTC}
    slices = []
    for i in range(rng.randint(1, params.max_slices)):
        budget = rng.choice(params.budgets_ms)
        rate = rng.choice(params.rates)
        stype = SliceType(f"toy{i}", classes.get(budget, ServiceClass.EMBB), rate, ms_to_s(budget), False)
        source = rng.choice(cells)
        demands = tuple(Demand(f"s{i}.d{j}", rate) for j in range(rng.randint(1, params.max_demands)))
        paths = tuple(admissible_paths(g, source, params.k_paths))
        slices.append(SliceRequest(f"s{i}", stype, source, demands, paths))
    return Scenario(g, tuple(slices), seed=seed, k_paths=params.k_paths, **options)
