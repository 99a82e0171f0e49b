import json
from collections import Counter

import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ranslice.scenario import (CATALOG, Scenario, ScenarioError, ServiceClass, builtin_nf_profiles,
                               builtin_slice_catalog, generate_scenario, load_scenario, save_scenario)
from ranslice.topology import Tier, serialize_topology

from conftest import chain_graph


def _type(name):
    return next(t for t in builtin_slice_catalog() if t.name == name)


@pytest.mark.parametrize("name, mbps, ms, iso", [
    ("URLLC_RO1", 4, 1, True), ("URLLC_RO2", 25, 1, True), ("URLLC_AW1", 100, 1, True),
    ("URLLC_AW2", 1000, 1, True), ("eMBB1", 10_000, 4, False), ("eMBB2", 20_000, 4, False),
    ("mMTC1", 1, 15, False), ("mMTC2", 2, 15, False),
])
def test_slice_catalog_row(name, mbps, ms, iso):
    t = _type(name)
    assert t.bandwidth == mbps
    assert t.max_delay == ms / 1000
    assert t.ran_isolation is iso


def test_catalog_size_and_classes():
    cat = builtin_slice_catalog()
    assert len(cat) == 8
    assert Counter(t.service_class for t in cat) == {ServiceClass.URLLC: 4, ServiceClass.EMBB: 2,
                                                      ServiceClass.MMTC: 2}


def test_nf_load_ratios():
    prof = builtin_nf_profiles()
    assert (prof["RU"].load_ratio, prof["DU"].load_ratio, prof["CU"].load_ratio) == (2.16, 1.44, 0.9)


def test_nf_delay_defaults():
    prof = builtin_nf_profiles()
    ms = lambda v: round(v * 1e3, 12)
    assert [ms(prof[t].d_proq) for t in ("RU", "DU", "CU")] == [0.10, 0.20, 0.25]
    assert [ms(prof[t].d_pro_min) for t in ("RU", "DU", "CU")] == [0.01, 0.02, 0.02]
    assert [ms(prof[t].d_prox) for t in ("RU", "DU", "CU")] == [0.10, 0.20, 0.20]
    assert all(ms(p.d_pro_max) == 0.5 for p in prof.values())


def test_generation_is_deterministic(default_graph):
    a = generate_scenario(default_graph, 5, 7)
    b = generate_scenario(default_graph, 5, 7)
    assert save_scenario(a) == save_scenario(b)


def test_smaller_scenario_is_prefix(default_graph):
    big = generate_scenario(default_graph, 20, 3)
    small = generate_scenario(default_graph, 8, 3)
    assert [(s.id, s.slice_type, s.source) for s in small.slices] == \
        [(s.id, s.slice_type, s.source) for s in big.slices[:8]]


def test_type_frequencies_uniform(default_graph):
    sc = generate_scenario(default_graph, 1000, 11)
    counts = Counter(s.slice_type.name for s in sc.slices)
    for t in CATALOG:
        assert abs(counts[t.name] / 1000 - 0.125) < 0.05
    assert stats.chisquare([counts[t.name] for t in CATALOG]).pvalue > 0.001


def test_source_frequencies_uniform(default_graph):
    sc = generate_scenario(default_graph, 3200, 5)
    counts = Counter(s.source for s in sc.slices)
    assert set(counts) == set(default_graph.sites_in_tier(Tier.CS))
    assert stats.chisquare(list(counts.values())).pvalue > 0.001


def test_demand_rate_is_type_bandwidth(default_graph):
    sc = generate_scenario(default_graph, 200, 2, demands_per_slice=1)
    s = next(s for s in sc.slices if s.slice_type.name == "URLLC_AW2")
    assert [d.rate for d in s.demands] == [1000.0]
    sc3 = generate_scenario(default_graph, 5, 2, demands_per_slice=3, demand_scale=0.5)
    for s in sc3.slices:
        assert [d.rate for d in s.demands] == [s.slice_type.bandwidth * 0.5] * 3


def test_paths_start_at_source(default_scenario):
    for s in default_scenario.slices:
        assert s.admissible_paths
        assert all(p.site_seq[0] == s.source for p in s.admissible_paths)
        assert s.nf_chain == ("RU", "DU", "CU")


def test_graph_without_core_rejected():
    g = chain_graph((0, 1, 3))
    from ranslice.topology import NetworkGraph, Site
    with pytest.raises(ScenarioError):
        generate_scenario(NetworkGraph([Site("A", Tier.EDGE, ())], [], []), 1, 0)
    assert generate_scenario(g, 1, 0).slices


def test_round_trip(default_scenario):
    doc = save_scenario(default_scenario)
    back = load_scenario(json.loads(json.dumps(doc)))
    assert save_scenario(back) == doc
    assert back.graph == default_scenario.graph
    assert back.slices == default_scenario.slices
    assert back.seed == default_scenario.seed


def test_alpha_default_and_range():
    g = chain_graph((0, 1, 3))
    doc = {"topology": serialize_topology(g), "slices": [{"type": "mMTC1", "source": "N0"}]}
    assert load_scenario(doc).alpha == 0.98
    with pytest.raises(ScenarioError) as exc:
        load_scenario(dict(doc, alpha=1.5))
    assert exc.value.field_path == "alpha"
    with pytest.raises(ValueError):
        Scenario(g, (), alpha=-0.1)


def test_schema_errors_carry_field_path():
    g = chain_graph((0, 1, 3))
    doc = {"topology": serialize_topology(g), "slices": [{"type": "nope", "source": "N0"}]}
    with pytest.raises(ScenarioError) as exc:
        load_scenario(doc)
    assert exc.value.field_path == "slices/0/type"
    with pytest.raises(ScenarioError) as exc:
        load_scenario({"topology": serialize_topology(g), "k_paths": 0})
    assert exc.value.field_path == "k_paths"
    with pytest.raises(ScenarioError) as exc:
        load_scenario({"topology": serialize_topology(g), "slices": [{"type": "mMTC1", "source": "N1"}]})
    assert exc.value.field_path == "slices/0/source"


def test_custom_types_and_profiles_round_trip():
    g = chain_graph((0, 1, 3))
    doc = {"topology": serialize_topology(g), "seed": 4, "k_paths": 2,
           "slice_types": [{"name": "tiny", "service_class": "URLLC", "bandwidth_mbps": 0.5, "max_delay_ms": 0.8}],
           "slices": [{"type": "tiny", "source": "N0", "campus": "plant-a"}],
           "nf_profiles": {"DU": {"d_proq_ms": 0.3}}, "piecewise": {"segments": [[1, 0], [4, 1.5]]}}
    sc = load_scenario(doc)
    assert sc.slices[0].max_delay == pytest.approx(0.8e-3)
    assert sc.slices[0].campus == "plant-a"
    assert sc.nf_profiles["DU"].d_proq == pytest.approx(0.3e-3)
    assert sc.piecewise(1.0) == 2.5
    again = load_scenario(save_scenario(sc))
    assert again.slices == sc.slices and again.piecewise == sc.piecewise


@given(st.integers(0, 30), st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
def test_generated_scenarios_valid(n, seed, k, dps):
    g = chain_graph((0, 0, 1, 2, 3))
    sc = generate_scenario(g, n, seed, k=k, demands_per_slice=dps)
    assert len(sc.slices) == n
    for s in sc.slices:
        assert g.sites[s.source].tier == Tier.CS
        assert len(s.demands) == dps
        assert all(p.site_seq[0] == s.source for p in s.admissible_paths)
