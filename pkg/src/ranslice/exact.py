"""Exact placement by combinatorial branch-and-bound, plus an exhaustive reference search.

The solver branches slice by slice over complete per-slice choices (one path prefix per demand up
to the CU site, and the RU/DU/CU servers). For every binary assignment the linear model's
continuous variables are determined (see ``model.encode``), so searching these choices and
evaluating the cost directly is equivalent to solving the MILP.

Bounding: the utilization cost is convex and every delay grows with utilization, so the cheapest
feasible option of each unplaced slice *at the current loads* is a valid lower bound on what that
slice will add, and an option that is infeasible now stays infeasible deeper in the tree.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .placement import Placement, SlicePlacement, SolveResult, Status
from .scenario import Scenario, SliceRequest
from .topology import NF_TYPES
from .validator import TOL, carried_links, objective_of_placement, validate


@dataclass
class _Options:
    """All structurally valid choices for one slice, as parallel arrays."""

    slice: SliceRequest
    choices: list  # (paths per demand, RU, DU, CU)
    srv: np.ndarray  # (n, 3) server index per NF
    du: np.ndarray  # (n, 3) utilization added by each NF
    a: np.ndarray  # (n, 3) load-independent processing delay
    link_delay: np.ndarray  # (n,) worst demand propagation delay
    link_cols: np.ndarray  # (m,) link indices touched by any option
    dl: np.ndarray  # (n, m) link utilization added
    forced: np.ndarray | None = None  # (n_servers,) utilization every option puts on each server

    def take(self, keep: np.ndarray) -> "_Options":
        idx = np.flatnonzero(keep)
        return _Options(self.slice, [self.choices[i] for i in idx], self.srv[idx], self.du[idx], self.a[idx],
                        self.link_delay[idx], self.link_cols, self.dl[idx])

    def with_forced(self, nx: int) -> "_Options":
        """Per-server load shared by all options (e.g. the RU on a single-server cell site)."""
        forced = np.zeros(nx)
        if self.choices:
            for x in np.unique(self.srv):
                forced[x] = ((self.srv == x) * self.du).sum(axis=1).min()
        self.forced = forced
        return self


class _Problem:
    def __init__(self, scenario: Scenario):
        g = scenario.graph
        self.scenario = scenario
        self.server_ids = list(g.servers)
        self.link_ids = list(g.links)
        self.sx = {x: i for i, x in enumerate(self.server_ids)}
        self.lx = {l: i for i, l in enumerate(self.link_ids)}
        self.nx, self.nl = len(self.server_ids), len(self.link_ids)
        self.wx = scenario.alpha / self.nx if self.nx else 0.0
        self.wl = (1.0 - scenario.alpha) / self.nl if self.nl else 0.0
        prof = [scenario.nf_profiles[v] for v in NF_TYPES]
        self.b = np.array([p.d_prox for p in prof])
        self.pmax = np.array([p.d_pro_max for p in prof])
        self.gamma = np.array([p.load_ratio for p in prof])
        segs = scenario.piecewise.segments
        self.pa = np.array([s[0] for s in segs])
        self.pb = np.array([s[1] for s in segs])
        self.cap_x = np.array([g.servers[x].capacity for x in self.server_ids])
        # identical servers at one site are interchangeable while empty
        groups: dict = {}
        self.group = np.zeros(self.nx, dtype=int)
        for i, x in enumerate(self.server_ids):
            srv = g.servers[x]
            key = (srv.site_id, srv.capacity, tuple(sorted(srv.proq_capacity.items())))
            self.group[i] = groups.setdefault(key, len(groups))

    def pw(self, u):
        return np.maximum((u[..., None] * self.pa - self.pb).max(axis=-1), 0.0)

    def options(self, s: SliceRequest) -> _Options:
        g, sc = self.scenario.graph, self.scenario
        queued = len(s.demands) if sc.queue_weighting == "count" else s.total_rate
        rate = s.total_rate
        choices, rows_l = [], []
        cand = list(dict.fromkeys(x for p in s.admissible_paths for x in p.server_seq))
        for cu in cand:
            cu_site = g.servers[cu].site_id
            prefixes: dict[tuple, str] = {}
            for p in s.admissible_paths:
                i = p.site_index(cu_site)
                if i is not None:
                    prefixes.setdefault(p.site_seq[: i + 1], p.id)
            for combo in itertools.product(prefixes.items(), repeat=len(s.demands)):
                common = set.intersection(*(set(pre) for pre, _ in combo))
                paths = tuple(pid for _, pid in combo)
                for du in cand:
                    if g.servers[du].site_id not in common:
                        continue
                    for ru in g.servers_at(s.source):
                        choices.append((paths, ru, du, cu))
        choices.sort(key=lambda c: (c[1], c[2], c[3], c[0]))
        n = len(choices)
        srv = np.zeros((n, 3), dtype=int)
        du_arr = np.zeros((n, 3))
        a = np.zeros((n, 3))
        link_delay = np.zeros(n)
        link_load: list[dict[int, float]] = []
        for i, (paths, *servers) in enumerate(choices):
            for j, (v, x) in enumerate(zip(NF_TYPES, servers)):
                prof = sc.nf_profiles[v]
                srv[i, j] = self.sx[x]
                du_arr[i, j] = prof.load_ratio * rate / g.servers[x].capacity
                a[i, j] = prof.d_proq * prof.load_ratio * queued / g.servers[x].proq_capacity[v] + prof.d_pro_min
            loads: dict[int, float] = {}
            worst = 0.0
            for d, pid in zip(s.demands, paths):
                links = carried_links(sc, s.path(pid), servers[2])
                worst = max(worst, math.fsum(g.links[l].delay for l in links))
                for l in links:
                    loads[self.lx[l]] = loads.get(self.lx[l], 0.0) + d.rate
            link_delay[i] = worst
            link_load.append(loads)
        cols = np.array(sorted({c for ld in link_load for c in ld}), dtype=int)
        pos = {c: k for k, c in enumerate(cols)}
        dl = np.zeros((n, len(cols)))
        for i, ld in enumerate(link_load):
            for c, load in ld.items():
                dl[i, pos[c]] = load / g.links[self.link_ids[c]].capacity
        return _Options(s, choices, srv, du_arr, a, link_delay, cols, dl)


class _State:
    """Current loads plus the delay rows of already placed slices (R @ u <= h)."""

    def __init__(self, prob: _Problem):
        self.prob = prob
        self.u = np.zeros(prob.nx)
        self.ul = np.zeros(prob.nl)
        self.rows: list[np.ndarray] = []
        self.rhs: list[float] = []
        self.hosted = np.zeros(prob.nx, dtype=int)

    def evaluate(self, opt: _Options, symmetry: bool = True, shifted: np.ndarray | None = None):
        """(feasible mask, marginal cost) of every option against the current state.

        With ``shifted`` (current loads plus loads known to arrive later) the returned cost is the
        marginal cost of the option's non-forced load on top of ``shifted``; feasibility is still
        judged at the current loads."""
        p = self.prob
        n = len(opt.choices)
        if n == 0:
            return np.zeros(0, dtype=bool), np.zeros(0)
        same = opt.srv[:, :, None] == opt.srv[:, None, :]  # (n, 3, 3)
        added = (same * opt.du[:, None, :]).sum(axis=2)  # load landing on the server of column j
        base = self.u[opt.srv]
        unew = base + added
        proc = opt.a + p.b * unew
        ok = (unew <= 1.0 + TOL).all(axis=1)
        ok &= (proc <= p.pmax + TOL).all(axis=1)
        ok &= opt.link_delay + proc.sum(axis=1) <= opt.slice.max_delay + TOL
        ulb = self.ul[opt.link_cols]
        uln = ulb + opt.dl
        ok &= (uln <= 1.0 + TOL).all(axis=1)
        if self.rows:
            R = np.array(self.rows)
            slack = np.array(self.rhs) - R @ self.u
            inc = (R[:, opt.srv] * opt.du[None]).sum(axis=2)  # (rows, n)
            ok &= (inc <= slack[:, None]).all(axis=0)
        first = np.ones((n, 3), dtype=bool)
        first[:, 1] = opt.srv[:, 1] != opt.srv[:, 0]
        first[:, 2] = (opt.srv[:, 2] != opt.srv[:, 0]) & (opt.srv[:, 2] != opt.srv[:, 1])
        if shifted is None:
            dcost = p.wx * ((p.pw(unew) - p.pw(base)) * first).sum(axis=1)
        else:
            sb = shifted[opt.srv]
            dcost = p.wx * ((p.pw(sb + added - opt.forced[opt.srv]) - p.pw(sb)) * first).sum(axis=1)
        if len(opt.link_cols):
            dcost = dcost + p.wl * (p.pw(uln) - p.pw(ulb)[None, :]).sum(axis=1)
        if symmetry:
            ok &= self._canonical(opt, first)
        return ok, dcost

    def _canonical(self, opt: _Options, first: np.ndarray) -> np.ndarray:
        """Among empty interchangeable servers only the lowest-indexed ones, in NF order."""
        p = self.prob
        empty = self.hosted == 0
        rank = np.zeros(p.nx, dtype=int)
        seen: dict[int, int] = {}
        for i in np.flatnonzero(empty):
            g = p.group[i]
            rank[i] = seen.get(g, 0)
            seen[g] = rank[i] + 1
        ok = np.ones(len(opt.choices), dtype=bool)
        for j in range(3):
            x = opt.srv[:, j]
            expected = np.zeros(len(x), dtype=int)
            for k in range(j):
                y = opt.srv[:, k]
                expected += (first[:, k] & empty[y] & (p.group[y] == p.group[x])).astype(int)
            ok &= ~(first[:, j] & empty[x]) | (rank[x] == expected)
        return ok

    def apply(self, opt: _Options, i: int):
        p = self.prob
        srv, du = opt.srv[i], opt.du[i]
        np.add.at(self.u, srv, du)
        np.add.at(self.hosted, srv, 1)
        self.ul[opt.link_cols] += opt.dl[i]
        row = np.zeros(p.nx)
        np.add.at(row, srv, p.b)
        self.rows.append(row)
        self.rhs.append(opt.slice.max_delay + TOL - opt.link_delay[i] - opt.a[i].sum())
        for j in range(3):
            r = np.zeros(p.nx)
            r[srv[j]] = p.b[j]
            self.rows.append(r)
            self.rhs.append(p.pmax[j] + TOL - opt.a[i, j])
        return srv, du, i

    def undo(self, opt: _Options, token):
        srv, du, i = token
        np.subtract.at(self.u, srv, du)
        np.subtract.at(self.hosted, srv, 1)
        self.ul[opt.link_cols] -= opt.dl[i]
        del self.rows[-4:], self.rhs[-4:]


def _to_placement(opts: list[_Options], picks: list[int]) -> Placement:
    out = Placement()
    for opt, i in zip(opts, picks):
        paths, ru, du, cu = opt.choices[i]
        out.slices[opt.slice.id] = SlicePlacement(
            {d.id: pid for d, pid in zip(opt.slice.demands, paths)}, {"RU": ru, "DU": du, "CU": cu})
    return out


def solve_exact(scenario: Scenario, time_limit: float = 600.0, gap_tolerance: float = 0.0,
                node_limit: int | None = None) -> SolveResult:
    t0 = time.perf_counter()
    prob = _Problem(scenario)
    order = sorted(scenario.slices, key=lambda s: (s.max_delay, s.id))
    empty_state = _State(prob)
    opts = []
    for s in order:
        o = prob.options(s)
        ok, _ = empty_state.evaluate(o, symmetry=False)
        opts.append(o.take(ok).with_forced(prob.nx))

    def result(status, placement, bound, nodes):
        obj = objective_of_placement(placement, scenario) if placement is not None else math.inf
        return SolveResult(status, placement, obj, bound, time.perf_counter() - t0, nodes, "exact")

    if any(len(o.choices) == 0 for o in opts):
        return result(Status.INFEASIBLE, None, math.inf, 0)

    state = _State(prob)
    best = [math.inf, None]
    nodes = 0
    stop = [None]
    root_bound = [None]

    # loads every remaining slice is certain to add, from depth d on
    forced_tail = [np.zeros(prob.nx) for _ in range(len(opts) + 1)]
    for d in range(len(opts) - 1, -1, -1):
        forced_tail[d] = forced_tail[d + 1] + opts[d].forced

    def lower_bound(depth):
        """Cost of the forced loads of slices depth.. plus each slice's cheapest remaining part.

        Valid because the cost is convex and separable: increments on a higher base are never
        cheaper, so splitting the future load into pieces priced independently underestimates."""
        shifted = state.u + forced_tail[depth]
        if (shifted > 1.0 + TOL).any():
            return math.inf, shifted  # loads that must arrive already overflow a server
        total = prob.wx * float((prob.pw(shifted) - prob.pw(state.u)).sum())
        for o in opts[depth + 1:]:
            ok, dc = state.evaluate(o, symmetry=False, shifted=shifted)
            if not ok.any():
                return math.inf, shifted
            total += dc[ok].min()
        return total, shifted

    def dfs(depth, cost, picks):
        nonlocal nodes
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            stop[0] = Status.INCOMPLETE
            return
        if time.perf_counter() - t0 > time_limit:
            stop[0] = Status.TIME_LIMIT
            return
        if depth == len(opts):
            if cost < best[0]:
                best[0], best[1] = cost, list(picks)
            return
        lb, shifted = lower_bound(depth)
        o = opts[depth]
        ok, dc = state.evaluate(o)
        if not ok.any() or math.isinf(lb):
            return
        _, bc = state.evaluate(o, symmetry=False, shifted=shifted)
        cand = np.flatnonzero(ok)
        cand = cand[np.lexsort((cand, dc[cand], bc[cand]))]
        if depth == 0 and root_bound[0] is None:
            root_bound[0] = bc[cand[0]] + lb
        for i in cand:
            if cost + bc[i] + lb >= best[0] * (1.0 - gap_tolerance) - 1e-12:
                break  # sorted by bound contribution, the rest cannot do better
            token = state.apply(o, i)
            picks.append(i)
            dfs(depth + 1, cost + dc[i], picks)
            picks.pop()
            state.undo(o, token)
            if stop[0] is not None:
                return

    dfs(0, 0.0, [])
    placement = _to_placement(opts, best[1]) if best[1] is not None else None
    bound = root_bound[0] if root_bound[0] is not None else math.inf
    if stop[0] is not None:
        return result(stop[0], placement, min(bound, best[0]), nodes)
    if placement is None:
        return result(Status.INFEASIBLE, None, math.inf, nodes)
    obj = objective_of_placement(placement, scenario)
    status = Status.OPTIMAL if gap_tolerance == 0 else Status.INCOMPLETE
    bound = obj if gap_tolerance == 0 else obj * (1.0 - gap_tolerance)
    return SolveResult(status, placement, obj, bound, time.perf_counter() - t0, nodes, "exact")


# ---------------------------------------------------------------------------
# exhaustive reference


def _slice_choices(scenario: Scenario, s: SliceRequest):
    """Every (paths, RU, DU, CU) combination with the servers drawn from the slice's paths."""
    servers = list(dict.fromkeys(x for p in s.admissible_paths for x in p.server_seq))
    routes = itertools.product([p.id for p in s.admissible_paths], repeat=len(s.demands))
    for paths in routes:
        for ru, du, cu in itertools.product(servers, repeat=3):
            yield SlicePlacement({d.id: pid for d, pid in zip(s.demands, paths)}, {"RU": ru, "DU": du, "CU": cu})


def brute_force(scenario: Scenario, hard_cap: int = 10**7) -> SolveResult:
    """Minimum-cost valid placement by enumeration, judged only by ``validator.validate``.

    Choices that are invalid for a slice on its own are dropped first; loads only grow when other
    slices are added, so they cannot become valid later."""
    t0 = time.perf_counter()
    per_slice = []
    for s in scenario.slices:
        alone = scenario.with_slices([s])
        valid = [sp for sp in _slice_choices(scenario, s) if validate(Placement({s.id: sp}), alone).ok]
        per_slice.append(valid)
    total = math.prod(len(v) for v in per_slice)
    if total > hard_cap:
        raise ValueError(f"brute force would enumerate {total} combinations (cap {hard_cap})")
    best, best_obj, count = None, math.inf, 0
    for combo in itertools.product(*per_slice):
        count += 1
        pl = Placement({s.id: sp for s, sp in zip(scenario.slices, combo)})
        if not validate(pl, scenario).ok:
            continue
        obj = objective_of_placement(pl, scenario)
        if obj < best_obj:
            best, best_obj = pl, obj
    status = Status.OPTIMAL if best is not None else Status.INFEASIBLE
    return SolveResult(status, best, best_obj, best_obj, time.perf_counter() - t0, count, "brute_force")
