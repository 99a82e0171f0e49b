import math

import pytest
from hypothesis import given, settings, strategies as st

from ranslice.exact import brute_force, solve_exact
from ranslice.heuristic import solve_first_fit
from ranslice.placement import Placement, SlicePlacement, Status
from ranslice.scenario import CATALOG, Demand, SliceRequest, generate_scenario
from ranslice.topology import Link, NetworkGraph, Server, Site, Tier, admissible_paths, ms_to_s
from ranslice.toy import make_toy_scenario
from ranslice.validator import objective_of_placement, objective_value, service_delay, utilizations, validate

from conftest import PROQ, chain_graph

RO1 = next(t for t in CATALOG if t.name == "URLLC_RO1")


def _one_slice(g, stype=RO1, rate=None, sid="s0"):
    from ranslice.scenario import Scenario
    paths = tuple(admissible_paths(g, "N0", 3))
    s = SliceRequest(sid, stype, "N0", (Demand(f"{sid}.d0", rate or stype.bandwidth),), paths)
    return Scenario(g, (s,))


def test_empty_scenario():
    res = solve_exact(_one_slice(chain_graph()).with_slices([]))
    assert res.status == Status.OPTIMAL
    assert res.objective == 0.0
    assert res.placement.slices == {}


def test_urllc_chain_places_ru_at_cell_site():
    sc = _one_slice(chain_graph((0, 1, 3), capacity=1000.0))
    res = solve_exact(sc)
    assert res.status == Status.OPTIMAL
    assert res.placement.server("s0", "RU") == "N0.x0"
    assert res.bound == pytest.approx(res.objective, abs=1e-6)


def test_all_paths_too_slow_is_infeasible():
    # the cell site cannot host the whole chain and the core is 5 ms away
    sc = _one_slice(chain_graph((0, 3), delays_ms=[5.0], capacity=10.0))
    assert brute_force(sc).status == Status.INFEASIBLE
    assert solve_exact(sc).status == Status.INFEASIBLE


def test_single_valid_triple_hand_evaluation():
    # two sites 2 ms apart: the CU cannot leave the cell site, so everything sits on N0.x0
    sc = _one_slice(chain_graph((0, 3), delays_ms=[2.0], capacity=100.0))
    res = brute_force(sc)
    assert res.status == Status.OPTIMAL
    assert res.placement.slices["s0"].server_of_nf == {"RU": "N0.x0", "DU": "N0.x0", "CU": "N0.x0"}
    u = (2.16 + 1.44 + 0.9) * 4 / 100
    expected = 0.98 / 2 * sc.piecewise(u) + 0.02 / 2 * 0.0
    assert res.objective == pytest.approx(expected, abs=1e-15)
    assert solve_exact(sc).objective == pytest.approx(expected, abs=1e-15)


def test_symmetric_twin_servers():
    sites = [Site("N0", Tier.CS, ("N0.x0",)), Site("N1", Tier.EDGE, ("N1.a", "N1.b")), Site("N2", Tier.CORE, ("N2.x0",))]
    servers = [Server("N0.x0", "N0", 100.0, PROQ), Server("N1.a", "N1", 50.0, PROQ), Server("N1.b", "N1", 50.0, PROQ),
               Server("N2.x0", "N2", 50.0, PROQ)]
    d = ms_to_s(0.1)
    links = [Link("a/f", "N0", "N1", 1e4, d, "a"), Link("a/r", "N1", "N0", 1e4, d, "a"),
             Link("b/f", "N1", "N2", 1e4, ms_to_s(2.0), "b"), Link("b/r", "N2", "N1", 1e4, ms_to_s(2.0), "b")]
    g = NetworkGraph(sites, servers, links)
    from ranslice.scenario import Scenario
    paths = tuple(admissible_paths(g, "N0", 2))
    slices = tuple(SliceRequest(f"s{i}", RO1, "N0", (Demand(f"s{i}.d0", 4.0),), paths) for i in range(2))
    sc = Scenario(g, slices)
    bf, ex = brute_force(sc), solve_exact(sc)
    assert bf.status == ex.status == Status.OPTIMAL
    assert ex.objective == pytest.approx(bf.objective, abs=1e-12)


def test_brute_force_guard():
    sc = generate_scenario(chain_graph((0, 0, 1, 2, 3)), 6, 1)
    with pytest.raises(ValueError, match="cap"):
        brute_force(sc, hard_cap=10)


def test_objective_of_empty_placement(default_scenario):
    assert objective_of_placement(Placement(), default_scenario) == 0.0


def test_alpha_reweighting(default_scenario):
    pl = solve_exact(default_scenario).placement
    ux, ul = utilizations(pl, default_scenario)
    nx_, nl = len(ux), len(ul)
    sx = math.fsum(default_scenario.piecewise(u) for u in ux.values()) / nx_
    sl = math.fsum(default_scenario.piecewise(u) for u in ul.values()) / nl
    from dataclasses import replace
    for alpha in (0.49, 0.98):
        sc = replace(default_scenario, alpha=alpha)
        assert objective_of_placement(pl, sc) == pytest.approx(alpha * sx + (1 - alpha) * sl, abs=1e-15)
    assert objective_value(default_scenario, ux, ul) == pytest.approx(0.98 * sx + 0.02 * sl, abs=1e-15)


def test_default_topology_result_consistent(default_scenario):
    res = solve_exact(default_scenario)
    assert res.status == Status.OPTIMAL
    assert res.objective == pytest.approx(objective_of_placement(res.placement, default_scenario), abs=1e-6)
    assert res.bound == pytest.approx(res.objective, abs=1e-6)
    assert validate(res.placement, default_scenario).ok
    for s in default_scenario.slices:
        for d in s.demands:
            assert service_delay(res.placement, default_scenario, s.id, d.id) <= s.max_delay + 1e-9


def test_deterministic(default_scenario):
    a, b = solve_exact(default_scenario), solve_exact(default_scenario)
    assert a.placement.to_doc() == b.placement.to_doc()
    assert (a.objective, a.bound, a.nodes_explored) == (b.objective, b.bound, b.nodes_explored)


def test_limits_report_incumbent(default_graph):
    sc = generate_scenario(default_graph, 15, 4, demand_scale=0.001)
    res = solve_exact(sc, node_limit=3)
    assert res.status == Status.INCOMPLETE
    res = solve_exact(sc, time_limit=1e-9)
    assert res.status == Status.TIME_LIMIT
    assert res.placement is None and math.isinf(res.objective)


def test_gap_tolerance_bounds_objective(default_graph):
    sc = generate_scenario(default_graph, 10, 2, demand_scale=0.001)
    opt = solve_exact(sc)
    loose = solve_exact(sc, gap_tolerance=0.05)
    assert loose.objective <= opt.objective / (1 - 0.05) + 1e-12
    assert loose.bound <= opt.objective + 1e-12


@settings(max_examples=15)
@given(st.integers(0, 5000))
def test_matches_brute_force(seed):
    sc = make_toy_scenario(seed)
    bf, ex = brute_force(sc), solve_exact(sc)
    assert bf.status == ex.status
    if bf.placement is not None:
        assert ex.objective == pytest.approx(bf.objective, abs=1e-9)
        assert validate(ex.placement, sc).ok


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_adding_a_slice_never_lowers_optimum(seed):
    sc = make_toy_scenario(seed)
    if len(sc.slices) < 2:
        return
    full = solve_exact(sc)
    part = solve_exact(sc.with_slices(sc.slices[:-1]))
    if full.placement is not None:
        assert part.placement is not None
        assert part.objective <= full.objective + 1e-12


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_feasibility_dominance(seed):
    sc = make_toy_scenario(seed)
    h = solve_first_fit(sc)
    if h.status == Status.FEASIBLE and validate(h.placement, sc).ok:
        ex = solve_exact(sc)
        assert ex.status == Status.OPTIMAL
        assert ex.objective <= h.objective + 1e-12
