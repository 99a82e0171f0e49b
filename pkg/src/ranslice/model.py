"""Solver-agnostic MILP for RAN slice placement.

Variables are identified by tuple tags:

    ("z", p, s)             slice s uses path p
    ("zd", p, d, s)         demand d of slice s uses path p
    ("fx", x)               server x hosts at least one NF
    ("fv", x, v, s)         NF v of slice s is on server x
    ("fd", x, d, v, s)      demand d is processed by NF v of slice s on server x
    ("ux", x) / ("ul", l)   utilization
    ("kx", x) / ("kl", l)   piecewise utilization cost (epigraph)
    ("dpro", x, v, s)       processing delay NF v of slice s would see on server x
    ("dsel", x, v, s, d)    dpro gated by fd (linearizes the delay*binary product)
    ("w", s, d, p, i)       demand d loads the i-th link of path p (link lies before the CU)

Constraint labels are ``family[entity,...]``; the family prefix names the equation it encodes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .costs import PiecewiseCost, piecewise_cost_eval  # noqa: F401  (re-exported)
from .placement import Placement, SlicePlacement
from .scenario import Scenario
from .topology import NF_TYPES

BINARY_TOL = 1e-6
CHECK_TOL = 1e-9
INF = float("inf")


class ModelError(ValueError):
    pass


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class VarRef:
    index: int
    tag: tuple
    kind: str  # "binary" | "continuous"
    lo: float
    hi: float

    @property
    def family(self) -> str:
        return self.tag[0]

    @property
    def label(self) -> str:
        return f"{self.tag[0]}[{','.join(map(str, self.tag[1:]))}]"


@dataclass
class LinearExpr:
    terms: dict[int, float] = field(default_factory=dict)
    constant: float = 0.0

    def value(self, values) -> float:
        return self.constant + sum(c * values[i] for i, c in self.terms.items())


@dataclass(frozen=True)
class Constraint:
    expr: LinearExpr
    sense: str  # "<=", "==", ">="
    rhs: float
    label: str

    @property
    def family(self) -> str:
        return self.label.split("[", 1)[0]

    def violation(self, values) -> float:
        lhs = self.expr.value(values)
        if self.sense == "<=":
            return lhs - self.rhs
        if self.sense == ">=":
            return self.rhs - lhs
        return abs(lhs - self.rhs)


@dataclass
class ModelIR:
    vars: list[VarRef]
    constraints: list[Constraint]
    objective: LinearExpr
    index: dict[tuple, int]
    scenario: Scenario
    # (stage, constraint index, var index, mode) used by ``encode`` to lift binaries to a full point
    definitions: list[tuple[int, int, int, str]] = field(default_factory=list)

    def var(self, tag: tuple) -> VarRef:
        return self.vars[self.index[tag]]

    def has(self, tag: tuple) -> bool:
        return tag in self.index


class _Builder:
    def __init__(self, scenario):
        self.scenario = scenario
        self.vars: list[VarRef] = []
        self.index: dict[tuple, int] = {}
        self.cons: list[Constraint] = []
        self.labels: set[str] = set()
        self.defs: list[tuple[int, int, int, str]] = []

    def var(self, tag, kind="binary", lo=0.0, hi=1.0) -> int:
        if tag in self.index:
            return self.index[tag]
        i = len(self.vars)
        self.vars.append(VarRef(i, tag, kind, lo, hi))
        self.index[tag] = i
        return i

    def cont(self, tag, lo=0.0, hi=INF) -> int:
        return self.var(tag, "continuous", lo, hi)

    def add(self, label, terms, sense, rhs, defines: tuple[int, int, str] | None = None):
        merged: dict[int, float] = {}
        for i, c in terms:
            merged[i] = merged.get(i, 0.0) + c
        merged = {i: c for i, c in merged.items() if c != 0.0}
        if label in self.labels:
            raise ModelError(f"duplicate constraint label {label}")
        self.labels.add(label)
        self.cons.append(Constraint(LinearExpr(merged), sense, float(rhs), label))
        if defines is not None:
            stage, var_index, mode = defines
            self.defs.append((stage, len(self.cons) - 1, var_index, mode))


def _dpro_bound(scenario, s, nf, server) -> float:
    """Upper bound on dpro when utilization is capped at 1."""
    prof = scenario.nf_profiles[nf]
    queued = len(s.demands) if scenario.queue_weighting == "count" else s.total_rate
    return (prof.d_proq * prof.load_ratio * queued / scenario.graph.servers[server].proq_capacity[nf]
            + prof.d_pro_min + prof.d_prox)


def candidate_servers(s) -> list[str]:
    seen: dict[str, None] = {}
    for p in s.admissible_paths:
        for x in p.server_seq:
            seen.setdefault(x, None)
    return list(seen)


def build_model(scenario: Scenario) -> ModelIR:
    g = scenario.graph
    b = _Builder(scenario)
    server_terms: dict[str, list] = {x: [] for x in g.servers}
    link_terms: dict[str, list] = {l: [] for l in g.links}
    used_by: dict[str, list] = {}
    to_cu = scenario.link_load_scope == "to_cu"

    for s in scenario.slices:
        if not s.admissible_paths:
            raise ModelError(f"slice {s.id} has no admissible path")
        P = s.admissible_paths
        D = s.demands
        cand = candidate_servers(s)
        z = {p.id: b.var(("z", p.id, s.id)) for p in P}
        zd = {(p.id, d.id): b.var(("zd", p.id, d.id, s.id)) for p in P for d in D}
        fv = {(x, v): b.var(("fv", x, v, s.id)) for x in cand for v in NF_TYPES}
        fd = {(x, d.id, v): b.var(("fd", x, d.id, v, s.id)) for x in cand for d in D for v in NF_TYPES}
        for x in cand:
            used_by.setdefault(x, []).extend(fv[(x, v)] for v in NF_TYPES)

        for d in D:
            b.add(f"eq3_route[{s.id},{d.id}]", [(zd[(p.id, d.id)], 1.0) for p in P], "==", 1.0)
        for p in P:
            for d in D:
                b.add(f"eq4_lo[{p.id},{d.id},{s.id}]", [(zd[(p.id, d.id)], 1.0), (z[p.id], -1.0)], "<=", 0.0)
            b.add(f"eq4_hi[{p.id},{s.id}]", [(z[p.id], 1.0)] + [(zd[(p.id, d.id)], -1.0) for d in D], "<=", 0.0)
        for d in D:
            for v in NF_TYPES:
                b.add(f"eq5_nf_assign[{s.id},{d.id},{v}]", [(fd[(x, d.id, v)], 1.0) for x in cand], "==", 1.0)
        for x in cand:
            for v in NF_TYPES:
                for d in D:
                    b.add(f"eq6_lo[{x},{d.id},{v},{s.id}]", [(fd[(x, d.id, v)], 1.0), (fv[(x, v)], -1.0)], "<=", 0.0)
                b.add(f"eq6_hi[{x},{v},{s.id}]",
                      [(fv[(x, v)], 1.0)] + [(fd[(x, d.id, v)], -1.0) for d in D], "<=", 0.0)
        for v in NF_TYPES:
            b.add(f"eq8_instance[{s.id},{v}]", [(fv[(x, v)], 1.0) for x in cand], "<=", 1.0)
        for p in P:
            for d in D:
                for v in NF_TYPES:
                    b.add(f"eq9_on_path[{s.id},{p.id},{d.id},{v}]",
                          [(fd[(x, d.id, v)], 1.0) for x in p.server_seq] + [(zd[(p.id, d.id)], -1.0)], ">=", 0.0)
        for p in P:
            site_servers = [g.servers_at(n) for n in p.site_seq]
            for d in D:
                for vi in (1, 2):
                    v, prev = NF_TYPES[vi], NF_TYPES[vi - 1]
                    upto: list = []
                    for n, xs in enumerate(site_servers):
                        upto.extend((fd[(y, d.id, prev)], 1.0) for y in xs)
                        terms = upto + [(fd[(x, d.id, v)], -1.0) for x in xs] + [(zd[(p.id, d.id)], -1.0)]
                        b.add(f"eq10_order[{s.id},{d.id},{p.id},{v},{p.site_seq[n]}]", terms, ">=", -1.0)
        b.add(f"eq11_ru_anchor[{s.id}]", [(fv[(x, "RU")], 1.0) for x in g.servers_at(s.source)], "==", 1.0)

        # processing delay and its gated copy
        for x in cand:
            ux = b.cont(("ux", x))
            for v in NF_TYPES:
                prof = scenario.nf_profiles[v]
                cap_q = g.servers[x].proq_capacity[v]
                dpro = b.cont(("dpro", x, v, s.id))
                terms = [(dpro, 1.0), (fv[(x, v)], -prof.d_pro_min), (ux, -prof.d_prox)]
                for d in D:
                    w_q = 1.0 if scenario.queue_weighting == "count" else d.rate
                    terms.append((fd[(x, d.id, v)], -prof.d_proq * prof.load_ratio * w_q / cap_q))
                b.add(f"eq12_dpro_def[{x},{v},{s.id}]", terms, "==", 0.0, defines=(2, dpro, "eq"))
                big_m = _dpro_bound(scenario, s, v, x)
                slack_m = max(0.0, big_m - prof.d_pro_max)
                b.add(f"eq12_dpro_max[{x},{v},{s.id}]", [(dpro, 1.0), (fv[(x, v)], slack_m)], "<=",
                      prof.d_pro_max + slack_m)
                for d in D:
                    dsel = b.cont(("dsel", x, v, s.id, d.id))
                    b.add(f"eq14_dsel[{x},{v},{s.id},{d.id}]",
                          [(dsel, 1.0), (dpro, -1.0), (fd[(x, d.id, v)], -big_m)], ">=", -big_m,
                          defines=(3, dsel, "ge"))
                    server_terms[x].append((fd[(x, d.id, v)], prof.load_ratio * d.rate / g.servers[x].capacity))

        # routed link load and end-to-end delay
        for p in P:
            for d in D:
                delay_terms = []
                if to_cu:
                    for i, l in enumerate(p.link_seq):
                        w = b.cont(("w", s.id, d.id, p.id, i), 0.0, 1.0)
                        reached = [(fd[(x, d.id, "CU")], 1.0) for n in p.site_seq[: i + 1] for x in g.servers_at(n)]
                        b.add(f"link_load_ind[{s.id},{d.id},{p.id},{i}]",
                              [(w, 1.0), (zd[(p.id, d.id)], -1.0)] + reached, ">=", 0.0, defines=(0, w, "ge01"))
                        link_terms[l].append((w, d.rate / g.links[l].capacity))
                        delay_terms.append((w, g.links[l].delay))
                else:
                    for l in p.link_seq:
                        link_terms[l].append((zd[(p.id, d.id)], d.rate / g.links[l].capacity))
                    delay_terms.append((zd[(p.id, d.id)], p.delay))
                for x in p.server_seq:
                    for v in NF_TYPES:
                        delay_terms.append((b.index[("dsel", x, v, s.id, d.id)], 1.0))
                b.add(f"eq14_delay[{s.id},{d.id},{p.id}]", delay_terms, "<=", s.max_delay)

    n_nf = len(scenario.slices) * len(NF_TYPES)
    for x in g.servers:
        if x in used_by:
            fx = b.var(("fx", x))
            b.add(f"eq7_lo[{x}]", [(fx, 1.0)] + [(i, -1.0 / n_nf) for i in used_by[x]], ">=", 0.0)
            b.add(f"eq7_hi[{x}]", [(fx, 1.0)] + [(i, -1.0) for i in used_by[x]], "<=", 0.0)

    pw = scenario.piecewise
    objective: dict[int, float] = {}
    nx, nl = len(g.servers), len(g.links)
    for kind, entities, terms_of, cap_family, util_family, weight in (
        ("x", g.servers, server_terms, "cap_server", "eq13_server_util", scenario.alpha / nx if nx else 0.0),
        ("l", g.links, link_terms, "cap_link", "link_util", (1.0 - scenario.alpha) / nl if nl else 0.0),
    ):
        for e in entities:
            u = b.cont(("u" + kind, e))
            k = b.cont(("k" + kind, e))
            b.add(f"{util_family}[{e}]", [(u, 1.0)] + [(i, -c) for i, c in terms_of[e]], "==", 0.0,
                  defines=(1, u, "eq"))
            b.add(f"{cap_family}[{e}]", [(u, 1.0)], "<=", 1.0)
            for j, (a, c) in enumerate(pw.segments):
                b.add(f"cost_{kind}[{e},{j}]", [(k, 1.0), (u, -a)], ">=", -c, defines=(4, k, "ge"))
            if weight:
                objective[k] = weight

    return ModelIR(b.vars, b.cons, LinearExpr(objective), b.index, scenario, b.defs)


def model_stats(m: ModelIR) -> dict:
    return {
        "binaries": sum(1 for v in m.vars if v.kind == "binary"),
        "continuous": sum(1 for v in m.vars if v.kind == "continuous"),
        "vars": dict(sorted(Counter(v.family for v in m.vars).items())),
        "constraints": dict(sorted(Counter(c.family for c in m.constraints).items())),
        "rows": len(m.constraints),
        "columns": len(m.vars),
    }


def check_assignment(m: ModelIR, values, tol: float = CHECK_TOL) -> list[str]:
    """Labels of violated constraints and variable bounds."""
    bad = [c.label for c in m.constraints if c.violation(values) > tol]
    for v in m.vars:
        if values[v.index] < v.lo - tol or values[v.index] > v.hi + tol:
            bad.append(f"bound[{v.label}]")
    return bad


def objective_value(m: ModelIR, values) -> float:
    return m.objective.value(values)


def encode(m: ModelIR, placement: Placement) -> list[float]:
    """Lift a placement to a full assignment: binaries from the placement, every auxiliary variable
    at the smallest value its defining constraints allow. The model is feasible for those binaries
    iff this point is."""
    values = [0.0] * len(m.vars)
    for sid, sp in placement.slices.items():
        for did, pid in sp.path_of_demand.items():
            for tag in (("zd", pid, did, sid), ("z", pid, sid)):
                if tag in m.index:
                    values[m.index[tag]] = 1.0
        for v, x in sp.server_of_nf.items():
            if ("fv", x, v, sid) in m.index:
                values[m.index[("fv", x, v, sid)]] = 1.0
                values[m.index[("fx", x)]] = 1.0
                for did in sp.path_of_demand.keys() | {d.id for d in m.scenario.slice(sid).demands}:
                    tag = ("fd", x, did, v, sid)
                    if tag in m.index:
                        values[m.index[tag]] = 1.0
    best: dict[int, float] = {}
    for stage, ci, vi, mode in sorted(m.definitions):
        c = m.constraints[ci]
        coef = c.expr.terms[vi]
        rest = sum(cf * values[i] for i, cf in c.expr.terms.items() if i != vi)
        val = (c.rhs - rest) / coef
        if mode == "eq":
            values[vi] = val
        else:
            val = max(val, 0.0)
            if mode == "ge01":
                val = min(val, 1.0)
            best[vi] = max(best.get(vi, 0.0), val)
            values[vi] = best[vi]
    return values


def decode(m: ModelIR, assignment) -> Placement:
    """Round binaries (tolerance 1e-6) and read off one path per demand and one server per NF."""
    if isinstance(assignment, dict):
        values = [0.0] * len(m.vars)
        for k, val in assignment.items():
            idx = k.index if isinstance(k, VarRef) else (m.index[k] if isinstance(k, tuple) else int(k))
            values[idx] = float(val)
    else:
        values = list(assignment)
    for v in m.vars:
        if v.kind == "binary":
            x = values[v.index]
            if min(abs(x), abs(x - 1.0)) > BINARY_TOL:
                raise DecodeError(f"fractional binary {v.label} = {x}")
    on = {v.tag for v in m.vars if v.kind == "binary" and values[v.index] > 0.5}
    placement = Placement()
    for s in m.scenario.slices:
        sp = SlicePlacement()
        for d in s.demands:
            chosen = [p.id for p in s.admissible_paths if ("zd", p.id, d.id, s.id) in on]
            if len(chosen) != 1:
                raise DecodeError(f"demand {d.id} of slice {s.id} uses {len(chosen)} paths (route constraint)")
            sp.path_of_demand[d.id] = chosen[0]
        for v in NF_TYPES:
            chosen = [x for x in candidate_servers(s) if ("fv", x, v, s.id) in on]
            if len(chosen) != 1:
                raise DecodeError(f"NF {v} of slice {s.id} is active on {len(chosen)} servers")
            sp.server_of_nf[v] = chosen[0]
        placement.slices[s.id] = sp
    return placement
