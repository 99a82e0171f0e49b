import random

import pytest
from hypothesis import given, settings, strategies as st

from ranslice.exact import solve_exact
from ranslice.model import Constraint, DecodeError, LinearExpr, ModelIR, VarRef, build_model, model_stats
from ranslice.mps import (MPSError, default_mangler, dump_placement, export_mps, import_solution, parse_solution,
                          read_mps)
from ranslice.placement import Status
from ranslice.scenario import generate_scenario
from ranslice.toy import make_toy_scenario

from conftest import random_placement
from oracles import mps_round_trip_error, solve_with_highs


def _tiny():
    v = VarRef(0, ("z", "p0", "s0"), "binary", 0.0, 1.0)
    c = Constraint(LinearExpr({0: 1.0}), "==", 1.0, "eq3_route[s0,d0]")
    return ModelIR([v], [c], LinearExpr({0: 2.0}), {v.tag: 0}, None)


def test_single_binary_has_one_marker_block():
    text = export_mps(_tiny()).decode()
    lines = text.splitlines()
    assert sum("'MARKER'" in l for l in lines) == 2
    assert sum("'INTORG'" in l for l in lines) == 1 and sum("'INTEND'" in l for l in lines) == 1
    start = next(i for i, l in enumerate(lines) if "'INTORG'" in l)
    end = next(i for i, l in enumerate(lines) if "'INTEND'" in l)
    assert {l.split()[0] for l in lines[start + 1:end]} == {"z_pp0_ss0"}
    for section in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert any(l.startswith(section) for l in lines)
    mdl = read_mps(text)
    assert mdl.integer == {"z_pp0_ss0"} and mdl.bounds["z_pp0_ss0"] == [0.0, 1.0]
    assert mps_round_trip_error(_tiny()) == 0.0


def test_export_is_deterministic(default_scenario):
    assert export_mps(build_model(default_scenario)) == export_mps(build_model(default_scenario))


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_round_trip_matrix(seed):
    assert mps_round_trip_error(build_model(make_toy_scenario(seed))) <= 1e-12


def test_round_trip_default_topology(default_scenario):
    assert mps_round_trip_error(build_model(default_scenario)) <= 1e-12


def test_names_are_unique_at_fifty_slices(default_graph):
    m = build_model(generate_scenario(default_graph, 50, 1, demand_scale=0.0005))
    names = [default_mangler(v.tag) for v in m.vars]
    assert len(set(names)) == len(names)
    assert max(map(len, names)) <= 255


def test_long_names_are_shortened():
    name = default_mangler(("z", "p" * 400, "s0"))
    assert len(name) == 255
    assert name != default_mangler(("z", "p" * 401, "s0"))


def test_collision_is_an_error():
    m = _tiny()
    v2 = VarRef(1, ("z", "p1", "s0"), "binary", 0.0, 1.0)
    m.vars.append(v2)
    with pytest.raises(MPSError, match="collision"):
        export_mps(m, name_mangler=lambda tag: "x")
    with pytest.raises(MPSError, match="collision"):
        import_solution("x 1\n", m, name_mangler=lambda tag: "x")


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(0, 2**32 - 1))
def test_dump_and_import_placement(seed, rs):
    sc = make_toy_scenario(seed)
    m = build_model(sc)
    pl = random_placement(sc, random.Random(rs))
    assert import_solution(dump_placement(m, pl), m) == pl


def test_missing_k_variable_still_decodes(default_scenario):
    m = build_model(default_scenario)
    res = solve_exact(default_scenario, time_limit=60)
    text = dump_placement(m, res.placement)
    kept = "\n".join(l for l in text.splitlines() if not l.startswith(("kx_", "kl_")))
    assert import_solution(kept, m) == res.placement
    values, obj = parse_solution(text)
    assert obj == pytest.approx(res.objective, abs=1e-9)


def test_fractional_binary_is_rejected():
    sc = make_toy_scenario(1)
    m = build_model(sc)
    z = next(v for v in m.vars if v.family == "z")
    with pytest.raises(DecodeError, match="fractional"):
        import_solution(f"{default_mangler(z.tag)} 0.5\n", m)


def test_unknown_name_and_bad_lines():
    m = build_model(make_toy_scenario(1))
    with pytest.raises(MPSError, match="unknown variable"):
        import_solution("nosuchvar 1\n", m)
    with pytest.raises(MPSError, match="bad value"):
        parse_solution("x abc\n")
    assert parse_solution("# comment\n=obj= 2.5\nx 1 # trailing\n") == ({"x": 1.0}, 2.5)


def test_export_counts_match_stats(default_scenario):
    m = build_model(default_scenario)
    mdl = read_mps(export_mps(m))
    stats = model_stats(m)
    assert len(mdl.row_sense) - 1 == stats["rows"]
    assert len(mdl.columns) == stats["columns"]
    assert len(mdl.integer) == stats["binaries"]


@pytest.mark.parametrize("seed", range(5))
def test_external_solver_agrees(seed):
    pytest.importorskip("highspy")
    sc = make_toy_scenario(seed)
    got = solve_with_highs(build_model(sc))
    ex = solve_exact(sc)
    if got is None:
        assert ex.status == Status.INFEASIBLE
        return
    obj, pl = got
    assert ex.status == Status.OPTIMAL
    assert obj == pytest.approx(ex.objective, abs=1e-6)
