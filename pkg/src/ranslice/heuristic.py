"""First-fit baseline: delay-ordered, tier-filtered greedy placement without delay checks."""

from __future__ import annotations

import time

from .placement import Placement, SlicePlacement, SolveResult, Status
from .scenario import Scenario, ServiceClass, SliceRequest
from .topology import NF_TYPES, Tier
from .validator import TOL, carried_links, objective_of_placement

_PREFERENCE = {
    ServiceClass.URLLC: [frozenset({Tier.CS, Tier.EDGE})],
    ServiceClass.EMBB: [frozenset({Tier.REGIONAL}), frozenset({Tier.EDGE}), frozenset({Tier.CS})],
    ServiceClass.MMTC: [frozenset({Tier.CORE})],
}


def tier_preference(service_class) -> list[frozenset[int]]:
    """Tier sets tried in order for the DU and CU of a slice of the given class."""
    return list(_PREFERENCE[ServiceClass(service_class)])


class _Residuals:
    def __init__(self, scenario: Scenario):
        g = scenario.graph
        self.scenario = scenario
        self.cap = {x: srv.capacity for x, srv in g.servers.items()}
        self.proq = {(x, v): srv.proq_capacity[v] for x, srv in g.servers.items() for v in NF_TYPES}
        self.link = {l: lk.capacity for l, lk in g.links.items()}

    def needs(self, s: SliceRequest) -> dict[str, tuple[float, float]]:
        sc = self.scenario
        queued = len(s.demands) if sc.queue_weighting == "count" else s.total_rate
        return {v: (sc.nf_profiles[v].load_ratio * s.total_rate, sc.nf_profiles[v].load_ratio * queued)
                for v in NF_TYPES}

    def fits(self, x, v, need, taken) -> bool:
        load = need[v][0] + sum(need[w][0] for w, y in taken.items() if y == x)
        return self.cap[x] - load >= -TOL and self.proq[(x, v)] - need[v][1] >= -TOL

    def commit(self, servers, need, links, rate):
        for v, x in servers.items():
            self.cap[x] -= need[v][0]
            self.proq[(x, v)] -= need[v][1]
        for l in links:
            self.link[l] -= rate


def _try_path(res: _Residuals, s: SliceRequest, path, tiers, need):
    """First (RU, DU, CU) in path order that is available; the DU moves on only when no CU fits after it."""
    g = res.scenario.graph
    for ru in g.servers_at(s.source):
        taken = {}
        if not res.fits(ru, "RU", need, taken):
            continue
        taken["RU"] = ru
        for du in path.server_seq:
            if g.tier_of_server(du) not in tiers or not res.fits(du, "DU", need, taken):
                continue
            taken["DU"] = du
            start = path.site_index(g.servers[du].site_id)
            for cu in path.server_seq:
                if path.site_index(g.servers[cu].site_id) < start or g.tier_of_server(cu) not in tiers:
                    continue
                if not res.fits(cu, "CU", need, taken):
                    continue
                links = carried_links(res.scenario, path, cu)
                if all(res.link[l] - s.total_rate >= -TOL for l in links):
                    taken["CU"] = cu
                    return taken, links
            del taken["DU"]
    return None


def place_slice(res: _Residuals, s: SliceRequest):
    need = res.needs(s)
    for tiers in tier_preference(s.service_class):
        for path in s.admissible_paths:
            found = _try_path(res, s, path, tiers, need)
            if found is not None:
                servers, links = found
                res.commit(servers, need, links, s.total_rate)
                return SlicePlacement({d.id: path.id for d in s.demands}, dict(servers))
    return None


def solve_first_fit(scenario: Scenario, skip_failed: bool = False) -> SolveResult:
    """Slices in ascending delay budget (ties by id); each NF goes to the first available server of
    the first path that can host the chain within the class's preferred tiers. Stops at the first
    slice that cannot be placed unless ``skip_failed``."""
    t0 = time.perf_counter()
    res = _Residuals(scenario)
    placement = Placement()
    unplaced: list[str] = []
    order = sorted(scenario.slices, key=lambda s: (s.max_delay, s.id))
    for n, s in enumerate(order):
        sp = place_slice(res, s)
        if sp is None:
            if not skip_failed:
                unplaced.extend(t.id for t in order[n:])
                break
            unplaced.append(s.id)
            continue
        placement.slices[s.id] = sp
    status = Status.INFEASIBLE if unplaced else Status.FEASIBLE
    obj = objective_of_placement(placement, scenario)
    return SolveResult(status, placement, obj, 0.0, time.perf_counter() - t0, len(order), "heuristic",
                       tuple(unplaced))
