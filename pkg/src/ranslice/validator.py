"""Direct constraint checking, delay/utilization evaluation and replication metrics.

Everything here works on the decoded placement, never on the linear model, so it can serve as an
independent check of both the model and the solvers.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .placement import Placement, SolveResult
from .scenario import Scenario, ServiceClass, SliceRequest
from .topology import NF_TYPES, Path, Tier

TOL = 1e-9


class PlacementError(ValueError):
    """Placement references entities that do not exist in the scenario."""


@dataclass(frozen=True)
class Violation:
    label: str
    entities: tuple
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def labels(self) -> set[str]:
        return {v.label for v in self.violations}

    def __len__(self) -> int:
        return len(self.violations)

    def __str__(self) -> str:
        if not self.violations:
            return "no violations"
        return "\n".join(f"{v.label} {v.entities}: lhs={v.lhs:.9g} rhs={v.rhs:.9g} slack={v.slack:.3g}"
                         for v in self.violations)


def check_wellformed(placement: Placement, scenario: Scenario) -> None:
    slices = {s.id: s for s in scenario.slices}
    for sid, sp in placement.slices.items():
        if sid not in slices:
            raise PlacementError(f"unknown slice {sid!r}")
        s = slices[sid]
        demands = {d.id for d in s.demands}
        paths = {p.id for p in s.admissible_paths}
        for did, pid in sp.path_of_demand.items():
            if did not in demands:
                raise PlacementError(f"slice {sid}: unknown demand {did!r}")
            if pid not in paths:
                raise PlacementError(f"slice {sid}: {pid!r} is not an admissible path")
        for nf, x in sp.server_of_nf.items():
            if nf not in NF_TYPES:
                raise PlacementError(f"slice {sid}: unknown NF type {nf!r}")
            if x not in scenario.graph.servers:
                raise PlacementError(f"slice {sid}: unknown server {x!r}")


def carried_links(scenario: Scenario, path: Path, cu_server: str | None) -> tuple[str, ...]:
    """Links loaded by a demand: those before the CU's site, or the whole path when the CU is
    off-path/unassigned or the scenario counts full paths."""
    if scenario.link_load_scope == "full_path" or cu_server is None:
        return path.link_seq
    idx = path.site_index(scenario.graph.servers[cu_server].site_id)
    return path.link_seq if idx is None else path.link_seq[:idx]


def utilizations(placement: Placement, scenario: Scenario) -> tuple[dict[str, float], dict[str, float]]:
    g = scenario.graph
    load_x = dict.fromkeys(g.servers, 0.0)
    load_l = dict.fromkeys(g.links, 0.0)
    for s in scenario.slices:
        sp = placement.slices.get(s.id)
        if sp is None:
            continue
        rate = s.total_rate
        for nf, x in sp.server_of_nf.items():
            load_x[x] += scenario.nf_profiles[nf].load_ratio * rate
        cu = sp.server_of_nf.get("CU")
        for d in s.demands:
            pid = sp.path_of_demand.get(d.id)
            if pid is None:
                continue
            for l in carried_links(scenario, s.path(pid), cu):
                load_l[l] += d.rate
    ux = {x: load_x[x] / g.servers[x].capacity for x in g.servers}
    ul = {l: load_l[l] / g.links[l].capacity for l in g.links}
    return ux, ul


def processing_delay(scenario: Scenario, s: SliceRequest, nf: str, server: str, ux: dict[str, float]) -> float:
    """Queueing + load-dependent processing delay of one NF instance (seconds)."""
    prof = scenario.nf_profiles[nf]
    x = scenario.graph.servers[server]
    queued = len(s.demands) if scenario.queue_weighting == "count" else s.total_rate
    d_proq = prof.d_proq * prof.load_ratio * queued / x.proq_capacity[nf]
    d_prox = prof.d_pro_min + prof.d_prox * ux[server]
    return d_proq + d_prox


def _demand_delay(scenario, s, sp, demand_id, ux) -> float:
    pid = sp.path_of_demand.get(demand_id)
    if pid is None:
        raise PlacementError(f"demand {demand_id} of slice {s.id} is not routed")
    links = carried_links(scenario, s.path(pid), sp.server_of_nf.get("CU"))
    delay = math.fsum(scenario.graph.links[l].delay for l in links)
    for nf, x in sp.server_of_nf.items():
        delay += processing_delay(scenario, s, nf, x, ux)
    return delay


def service_delay(placement: Placement, scenario: Scenario, slice_id: str, demand_id: str) -> float:
    """End-to-end delay of one demand: propagation up to the CU's site plus every NF's processing."""
    s = scenario.slice(slice_id)
    sp = placement.slices.get(slice_id)
    if sp is None:
        raise PlacementError(f"slice {slice_id} is not placed")
    ux, _ = utilizations(placement, scenario)
    return _demand_delay(scenario, s, sp, demand_id, ux)


def objective_value(scenario: Scenario, ux: dict[str, float], ul: dict[str, float]) -> float:
    pw = scenario.piecewise
    nx, nl = len(ux), len(ul)
    server_part = math.fsum(pw(u) for u in ux.values()) / nx if nx else 0.0
    link_part = math.fsum(pw(u) for u in ul.values()) / nl if nl else 0.0
    return scenario.alpha * server_part + (1.0 - scenario.alpha) * link_part


def objective_of_placement(placement: Placement, scenario: Scenario) -> float:
    ux, ul = utilizations(placement, scenario)
    return objective_value(scenario, ux, ul)


def validate(placement: Placement, scenario: Scenario, tol: float = TOL) -> ViolationReport:
    check_wellformed(placement, scenario)
    g = scenario.graph
    out: list[Violation] = []
    ux, ul = utilizations(placement, scenario)
    for s in scenario.slices:
        sp = placement.slices.get(s.id)
        paths = sp.path_of_demand if sp else {}
        servers = sp.server_of_nf if sp else {}
        for d in s.demands:
            if d.id not in paths:
                out.append(Violation("eq3_route", (s.id, d.id), 0.0, 1.0))
        for nf in NF_TYPES:
            if nf not in servers:
                out.append(Violation("eq5_nf_assign", (s.id, nf), 0.0, 1.0))
        ru = servers.get("RU")
        if ru is not None and g.servers[ru].site_id != s.source:
            out.append(Violation("eq11_ru_anchor", (s.id, ru), 0.0, 1.0))
        for did, pid in paths.items():
            path = s.path(pid)
            pos = {}
            for nf, x in servers.items():
                if x not in path.server_seq:
                    out.append(Violation("eq9_on_path", (s.id, did, pid, nf, x), 0.0, 1.0))
                else:
                    pos[nf] = path.site_index(g.servers[x].site_id)
            for prev, nxt in zip(NF_TYPES, NF_TYPES[1:]):
                if prev in pos and nxt in pos and pos[prev] > pos[nxt]:
                    out.append(Violation("eq10_order", (s.id, did, pid, nxt), float(pos[prev]), float(pos[nxt])))
        for nf, x in servers.items():
            prof = scenario.nf_profiles[nf]
            d_pro = processing_delay(scenario, s, nf, x, ux)
            if d_pro > prof.d_pro_max + tol:
                out.append(Violation("eq12_dpro_max", (s.id, nf, x), d_pro, prof.d_pro_max))
        if sp is not None and all(nf in servers for nf in NF_TYPES):
            for d in s.demands:
                if d.id in paths:
                    delay = _demand_delay(scenario, s, sp, d.id, ux)
                    if delay > s.max_delay + tol:
                        out.append(Violation("eq14_delay", (s.id, d.id), delay, s.max_delay))
    for x, u in ux.items():
        if u > 1.0 + tol:
            out.append(Violation("cap_server", (x,), u, 1.0))
    for l, u in ul.items():
        if u > 1.0 + tol:
            out.append(Violation("cap_link", (l,), u, 1.0))
    return ViolationReport(out)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Estimate:
    mean: float
    halfwidth: float
    n: int


def t_interval(values, level: float = 0.95) -> Estimate:
    vals = np.array([v for v in values if v is not None and not math.isnan(v)], dtype=float)
    n = len(vals)
    if n == 0:
        return Estimate(math.nan, math.nan, 0)
    mean = float(vals.mean())
    if n < 2:
        return Estimate(mean, math.nan, n)
    # identical replications give exactly zero width (the float mean can drift by an ulp)
    sd = 0.0 if np.all(vals == vals[0]) else float(vals.std(ddof=1))
    return Estimate(mean, float(stats.t.ppf(0.5 + level / 2, n - 1) * sd / math.sqrt(n)), n)


def run_metrics(scenario: Scenario, result: SolveResult) -> dict:
    """Per-run figures: utilizations, per-class delay of budget-compliant slices, tier occupancy."""
    placement = result.placement or Placement()
    g = scenario.graph
    ux, ul = utilizations(placement, scenario)
    delays: dict[str, list[float]] = defaultdict(list)
    sla = 0
    urllc_total = urllc_cs = 0
    tiers = {t: {"du": 0, "cu": 0} for t in Tier}
    for s in scenario.slices:
        sp = placement.slices.get(s.id)
        complete = sp is not None and all(nf in sp.server_of_nf for nf in NF_TYPES) \
            and all(d.id in sp.path_of_demand for d in s.demands)
        if s.service_class == ServiceClass.URLLC:
            urllc_total += 1
        if not complete:
            sla += 1
            continue
        ds = [_demand_delay(scenario, s, sp, d.id, ux) for d in s.demands]
        if max(ds) > s.max_delay + TOL:
            sla += 1
        else:
            delays[s.service_class.value].extend(ds)
        placed_tiers = {nf: g.tier_of_server(x) for nf, x in sp.server_of_nf.items()}
        tiers[placed_tiers["DU"]]["du"] += 1
        tiers[placed_tiers["CU"]]["cu"] += 1
        if s.service_class == ServiceClass.URLLC and all(t == Tier.CS for t in placed_tiers.values()):
            urllc_cs += 1
    tier_util = {}
    for t in Tier:
        us = [ux[x] for x in g.servers if g.tier_of_server(x) == t]
        tier_util[t] = float(np.mean(us)) if us else math.nan
    return {
        "avg_server_util": float(np.mean(list(ux.values()))) if ux else 0.0,
        "avg_link_util": float(np.mean(list(ul.values()))) if ul else 0.0,
        "delay": {c.value: (float(np.mean(delays[c.value])) if delays[c.value] else math.nan) for c in ServiceClass},
        "sla_violations": sla,
        "urllc_total": urllc_total,
        "urllc_at_cs": urllc_cs,
        "urllc_fully_at_cs": urllc_cs / urllc_total if urllc_total else math.nan,
        "tiers": {int(t): {"du": tiers[t]["du"], "cu": tiers[t]["cu"], "util": tier_util[t]} for t in Tier},
        "objective": result.objective,
        "runtime": result.runtime,
    }


@dataclass
class MetricsReport:
    avg_server_utilization: Estimate
    avg_link_utilization: Estimate
    delay_by_class: dict[str, Estimate]
    tier_occupancy: dict[int, dict[str, Estimate]]
    urllc_fully_at_cs: float
    sla_violations: int
    replications: int


def aggregate_metrics(results, level: float = 0.95) -> MetricsReport:
    """Replication means with Student-t half-widths. ``results`` is a list of (scenario, SolveResult)."""
    results = list(results)
    if not results:
        raise ValueError("aggregate_metrics needs at least one result")
    runs = [r if isinstance(r, dict) else run_metrics(*r) for r in results]
    cs = sum(r["urllc_at_cs"] for r in runs)
    total = sum(r["urllc_total"] for r in runs)
    return MetricsReport(
        avg_server_utilization=t_interval([r["avg_server_util"] for r in runs], level),
        avg_link_utilization=t_interval([r["avg_link_util"] for r in runs], level),
        delay_by_class={c.value: t_interval([r["delay"][c.value] for r in runs], level) for c in ServiceClass},
        tier_occupancy={
            int(t): {k: t_interval([r["tiers"][int(t)][k] for r in runs], level) for k in ("du", "cu", "util")}
            for t in Tier
        },
        urllc_fully_at_cs=cs / total if total else math.nan,
        sla_violations=sum(r["sla_violations"] for r in runs),
        replications=len(runs),
    )
