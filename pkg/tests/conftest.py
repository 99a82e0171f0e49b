import os

import hypothesis
import pytest

from ranslice.scenario import generate_scenario
from ranslice.topology import Link, NetworkGraph, Server, Site, Tier, generate_default_topology, ms_to_s
from ranslice.toy import make_toy_scenario

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=15, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PROQ = {"RU": 10.0, "DU": 10.0, "CU": 10.0}


def chain_graph(tiers=(0, 1, 3), capacity=100.0, delays_ms=None, link_mbps=10_000.0, proq=None):
    """One site per entry of ``tiers`` in a line, one server each, bidirectional links between neighbours."""
    ids = [f"N{i}" for i in range(len(tiers))]
    caps = capacity if isinstance(capacity, (list, tuple)) else [capacity] * len(ids)
    sites = [Site(n, Tier(t), (f"{n}.x0",)) for n, t in zip(ids, tiers)]
    servers = [Server(f"{n}.x0", n, float(c), dict(proq or PROQ)) for n, c in zip(ids, caps)]
    delays_ms = delays_ms or [0.1] * (len(ids) - 1)
    links = []
    for i, (a, b) in enumerate(zip(ids, ids[1:])):
        d = ms_to_s(delays_ms[i])
        links += [Link(f"L{i}/f", a, b, link_mbps, d, f"L{i}"), Link(f"L{i}/r", b, a, link_mbps, d, f"L{i}")]
    return NetworkGraph(sites, servers, links)


@pytest.fixture(scope="session")
def default_graph():
    return generate_default_topology(seed=1)


@pytest.fixture(scope="session")
def default_scenario(default_graph):
    return generate_scenario(default_graph, 12, 3, demand_scale=0.001)


@pytest.fixture(scope="session")
def toy_scenarios():
    return [make_toy_scenario(seed) for seed in range(60)]


def random_placement(scenario, rng, structured: float = 0.5):
    """Random integral placement. With probability ``structured`` per slice the RU sits at the source
    and DU/CU follow the path order (usually feasible); otherwise servers are drawn from anywhere on
    the slice's paths (usually not)."""
    from ranslice.model import candidate_servers
    from ranslice.placement import Placement, SlicePlacement

    g = scenario.graph
    out = Placement()
    for s in scenario.slices:
        paths = {d.id: rng.choice(s.admissible_paths).id for d in s.demands}
        if rng.random() < structured:
            p = s.path(paths[s.demands[0].id])
            ru = rng.choice(g.servers_at(s.source))
            i = rng.randrange(len(p.site_seq))
            j = rng.randrange(i, len(p.site_seq))
            du = rng.choice(g.servers_at(p.site_seq[i]))
            cu = rng.choice(g.servers_at(p.site_seq[j]))
            paths = {d.id: p.id for d in s.demands}
        else:
            ru, du, cu = (rng.choice(candidate_servers(s)) for _ in range(3))
        out.slices[s.id] = SlicePlacement(paths, {"RU": ru, "DU": du, "CU": cu})
    return out


# one line per acceptance criterion, shown after the run whatever the capture mode
ACCEPTANCE: list[str] = []


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
