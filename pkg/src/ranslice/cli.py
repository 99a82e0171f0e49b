"""Command-line experiment driver: ``ran-slice-opt {run|sweep|validate|export-mps|gen-topology}``.

Any flag can also be given through the environment as ``RSO_<FLAG>`` (``RSO_SEED=3``,
``RSO_TIME_LIMIT=60``); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .exact import solve_exact
from .heuristic import solve_first_fit
from .model import ModelError, build_model, model_stats
from .mps import MPSError, export_mps
from .placement import Placement, SolveResult, Status
from .scenario import Scenario, ScenarioError, ServiceClass, generate_scenario, load_scenario, save_scenario
from .topology import (DEFAULT_TIER_COUNTS, TopologyError, TopologyParams, generate_default_topology, load_topology,
                       serialize_topology, s_to_ms)
from .validator import PlacementError, aggregate_metrics, run_metrics, validate

ENV_PREFIX = "RSO_"
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_TIMELIMIT = 0, 1, 2, 3
SOLVERS = {"exact": ("exact",), "heuristic": ("heuristic",), "both": ("exact", "heuristic")}
METRIC_COLUMNS = ["slice_count", "solver", "replication", "avg_server_util", "avg_link_util", "delay_urllc_s",
                  "delay_embb_s", "delay_mmtc_s", "sla_violations", "urllc_fully_at_cs", "objective", "runtime_s"]
BUDGETS_MS = {"URLLC": 1.0, "eMBB": 4.0, "mMTC": 15.0}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario_file: str | None = None
    topology_file: str | None = None
    slices: int = 5
    solver: str = "both"
    replications: int = 1
    seed: int = 1
    alpha: float = 0.98
    time_limit: float = 600.0
    output_dir: str = "results"
    k_paths: int = 3
    demands_per_slice: int = 1
    demand_scale: float = 0.0005
    queue_weighting: str = "count"
    link_load_scope: str = "to_cu"
    topology_seed: int = 1
    workers: int = 1
    skip_failed: bool = False
    no_timing: bool = False
    slice_counts: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha={self.alpha} outside [0, 1]")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.slices < 0 or any(c < 0 for c in self.slice_counts):
            raise ConfigError("slice counts must be >= 0")
        if self.time_limit <= 0:
            raise ConfigError("time_limit must be positive")

    def echo(self) -> dict:
        """Columns appended to every CSV row so it can be reproduced on its own."""
        return {
            "seed": self.seed, "alpha": self.alpha, "k_paths": self.k_paths,
            "demands_per_slice": self.demands_per_slice, "demand_scale": self.demand_scale,
            "queue_weighting": self.queue_weighting, "link_load_scope": self.link_load_scope,
            "time_limit": self.time_limit, "topology": self.topology_file or f"default(seed={self.topology_seed})",
            "scenario_file": self.scenario_file or "",
        }


# ---------------------------------------------------------------------------
# experiment core


def make_scenario(cfg: RunConfig, n_slices: int, replication: int) -> Scenario:
    seed = cfg.seed + replication
    if cfg.scenario_file:
        path = Path(cfg.scenario_file)
        doc = json.loads(path.read_text())
        if "slices" not in doc:
            doc = {**doc, "seed": doc.get("seed", 0) + replication}
        sc = load_scenario(doc, base_dir=str(path.parent))
        return replace(sc, alpha=cfg.alpha) if "alpha" not in doc else sc
    if cfg.topology_file:
        graph = load_topology(json.loads(Path(cfg.topology_file).read_text()))
    else:
        graph = generate_default_topology(seed=cfg.topology_seed)
    return generate_scenario(graph, n_slices, seed, k=cfg.k_paths, demands_per_slice=cfg.demands_per_slice,
                             demand_scale=cfg.demand_scale, alpha=cfg.alpha, queue_weighting=cfg.queue_weighting,
                             link_load_scope=cfg.link_load_scope)


def solve(cfg: RunConfig, scenario: Scenario, solver: str) -> SolveResult:
    if solver == "exact":
        return solve_exact(scenario, time_limit=cfg.time_limit)
    return solve_first_fit(scenario, skip_failed=cfg.skip_failed)


def run_point(args) -> dict:
    """One (slice count, replication): scenario, every requested solver, validation, metrics."""
    cfg, n_slices, rep = args
    sc = make_scenario(cfg, n_slices, rep)
    out = {"n": len(sc.slices), "rep": rep, "scenario": save_scenario(sc), "solvers": {}}
    for name in SOLVERS[cfg.solver]:
        res = solve(cfg, sc, name)
        report = validate(res.placement, sc) if res.placement is not None else None
        m = run_metrics(sc, res)
        if cfg.no_timing:
            res.runtime = 0.0
            m["runtime"] = 0.0
        out["solvers"][name] = {
            "status": res.status.value, "objective": res.objective, "bound": res.bound, "runtime": res.runtime,
            "nodes": res.nodes_explored, "unplaced": list(res.unplaced),
            "placement": res.placement.to_doc() if res.placement is not None else None,
            "violations": sorted(report.labels()) if report else [], "n_violations": len(report) if report else 0,
            "metrics": m,
        }
    return out


def run_points(cfg: RunConfig, points: list[tuple[int, int]]) -> list[dict]:
    jobs = [(cfg, n, r) for n, r in points]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_point, jobs))
    else:
        results = [run_point(j) for j in jobs]
    return sorted(results, key=lambda r: (r["n"], r["rep"]))


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else format(x, ".10g")
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[dict]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h, "")) for h in header])
    path.write_text(buf.getvalue())


def metric_row(cfg: RunConfig, point: dict, solver: str) -> dict:
    res = point["solvers"][solver]
    m = res["metrics"]
    return {
        "slice_count": point["n"], "solver": solver, "replication": point["rep"],
        "avg_server_util": m["avg_server_util"], "avg_link_util": m["avg_link_util"],
        "delay_urllc_s": m["delay"]["URLLC"], "delay_embb_s": m["delay"]["eMBB"], "delay_mmtc_s": m["delay"]["mMTC"],
        "sla_violations": m["sla_violations"], "urllc_fully_at_cs": m["urllc_fully_at_cs"],
        "objective": res["objective"], "runtime_s": res["runtime"],
        **cfg.echo(), "scenario_seed": cfg.seed + point["rep"],
    }


def result_row(cfg: RunConfig, point: dict, solver: str) -> dict:
    res = point["solvers"][solver]
    return {
        "slice_count": point["n"], "solver": solver, "replication": point["rep"], "status": res["status"],
        "objective": res["objective"], "bound": res["bound"], "runtime_s": res["runtime"], "nodes": res["nodes"],
        "violations": len(res["violations"]) and res["n_violations"], "violated": ";".join(res["violations"]),
        "unplaced": ";".join(res["unplaced"]), **cfg.echo(), "scenario_seed": cfg.seed + point["rep"],
    }


def write_tables(cfg: RunConfig, points: list[dict], out: Path):
    echo = list(cfg.echo()) + ["scenario_seed"]
    solvers = SOLVERS[cfg.solver]
    _write_csv(out / "metrics.csv", METRIC_COLUMNS + echo, [metric_row(cfg, p, s) for p in points for s in solvers])
    res_cols = ["slice_count", "solver", "replication", "status", "objective", "bound", "runtime_s", "nodes",
                "violations", "violated", "unplaced"]
    _write_csv(out / "results.csv", res_cols + echo, [result_row(cfg, p, s) for p in points for s in solvers])


def write_figures(cfg: RunConfig, points: list[dict], out: Path, svg: bool = True):
    """Plot data (and SVG renderings) for server/link utilization, delay by class and tier use."""
    counts = sorted({p["n"] for p in points})
    solvers = SOLVERS[cfg.solver]
    fig4, fig5, fig8 = [], [], []
    delay = {s: [] for s in solvers}
    for n in counts:
        for s in solvers:
            runs = [p["solvers"][s]["metrics"] for p in points if p["n"] == n]
            rep = aggregate_metrics(runs)
            for rows, est in ((fig4, rep.avg_server_utilization), (fig5, rep.avg_link_utilization)):
                rows.append({"slice_count": n, "solver": s, "mean": est.mean, "ci_halfwidth": est.halfwidth,
                             "n": est.n})
            for c in ServiceClass:
                est = rep.delay_by_class[c.value]
                delay[s].append({"slice_count": n, "solver": s, "class": c.value, "mean_ms": s_to_ms(est.mean)
                                 if not math.isnan(est.mean) else math.nan,
                                 "ci_halfwidth_ms": est.halfwidth * 1e3, "n": est.n,
                                 "budget_ms": BUDGETS_MS[c.value]})
            for tier, occ in rep.tier_occupancy.items():
                fig8.append({"slice_count": n, "solver": s, "tier": tier,
                             "du_mean": occ["du"].mean, "du_ci": occ["du"].halfwidth,
                             "cu_mean": occ["cu"].mean, "cu_ci": occ["cu"].halfwidth,
                             "util_mean": occ["util"].mean, "util_ci": occ["util"].halfwidth})
    base = ["slice_count", "solver", "mean", "ci_halfwidth", "n"]
    _write_csv(out / "fig4_server_utilization.csv", base, fig4)
    _write_csv(out / "fig5_link_utilization.csv", base, fig5)
    dcols = ["slice_count", "solver", "class", "mean_ms", "ci_halfwidth_ms", "n", "budget_ms"]
    files = {"heuristic": "fig6_delay_heuristic.csv", "exact": "fig7_delay_exact.csv"}
    for s in solvers:
        _write_csv(out / files[s], dcols, delay[s])
    _write_csv(out / "fig8_tier_occupancy.csv",
               ["slice_count", "solver", "tier", "du_mean", "du_ci", "cu_mean", "cu_ci", "util_mean", "util_ci"], fig8)
    if svg:
        from .plots import render_figures
        render_figures(out, fig4, fig5, delay, fig8)


def exit_code(points: list[dict], cfg: RunConfig) -> int:
    primary = "exact" if "exact" in SOLVERS[cfg.solver] else "heuristic"
    statuses = [p["solvers"][primary] for p in points]
    if any(s["status"] == Status.TIME_LIMIT.value and s["placement"] is None for s in statuses):
        return EXIT_TIMELIMIT
    if any(s["status"] == Status.INFEASIBLE.value for s in statuses):
        return EXIT_INFEASIBLE
    return EXIT_OK


# ---------------------------------------------------------------------------
# commands


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = run_points(cfg, [(cfg.slices, r) for r in range(cfg.replications)])
    for p in points:
        (out / f"scenario_r{p['rep']}.json").write_text(json.dumps(p["scenario"], indent=1, sort_keys=True))
        for s, res in p["solvers"].items():
            doc = {"status": res["status"], "objective": res["objective"], "solver": s,
                   **(res["placement"] or {"slices": {}})}
            (out / f"placement_{s}_r{p['rep']}.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
            print(f"n={p['n']} rep={p['rep']} {s}: {res['status']} objective={_fmt(res['objective'])} "
                  f"violations={res['n_violations']} runtime={res['runtime']:.3f}s")
    write_tables(cfg, points, out)
    write_figures(cfg, points, out, svg=False)
    return exit_code(points, cfg)


def cmd_sweep(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = cfg.slice_counts or list(range(5, 55, 5))
    points = run_points(cfg, [(n, r) for n in counts for r in range(cfg.replications)])
    write_tables(cfg, points, out)
    write_figures(cfg, points, out)
    for n in counts:
        line = [f"n={n:3d}"]
        for s in SOLVERS[cfg.solver]:
            sla = sum(p["solvers"][s]["metrics"]["sla_violations"] for p in points if p["n"] == n)
            line.append(f"{s}: sla_violations={sla}")
        print("  ".join(line))
    return EXIT_OK


def cmd_validate(placement_file: str, scenario_file: str) -> int:
    try:
        sc_path = Path(scenario_file)
        sc = load_scenario(json.loads(sc_path.read_text()), base_dir=str(sc_path.parent))
        pl = Placement.from_doc(json.loads(Path(placement_file).read_text()))
        report = validate(pl, sc)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    print(report)
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def cmd_export_mps(scenario_file: str, out_path: str) -> int:
    try:
        sc_path = Path(scenario_file)
        sc = load_scenario(json.loads(sc_path.read_text()), base_dir=str(sc_path.parent))
        m = build_model(sc)
        data = export_mps(m)
        Path(out_path).write_bytes(data)
    except (OSError, ValueError, ModelError, MPSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    st = model_stats(m)
    print(f"rows={st['rows']} columns={st['columns']} binaries={st['binaries']} continuous={st['continuous']}")
    return EXIT_OK


def cmd_gen_topology(out_path: str | None, seed: int, ring_size: int, tiers: dict[int, int],
                     links: int | None = None) -> int:
    # the 70-link target only applies to the default tier counts unless asked for explicitly
    if links is None and tiers == dict(DEFAULT_TIER_COUNTS):
        links = TopologyParams().target_links
    try:
        g = generate_default_topology(tiers, ring_size=ring_size, seed=seed,
                                      params=TopologyParams(tier_counts=tiers, target_links=links))
    except (ValueError, TopologyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    text = json.dumps(serialize_topology(g), indent=1, sort_keys=True)
    if out_path:
        try:
            Path(out_path).write_text(text)
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_ERROR
        print(f"{len(g.sites)} sites, {len(g.physical_links())} bidirectional links -> {out_path}")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.replace(" ", "").split(",") if t]


def _add_config_flags(p: argparse.ArgumentParser):
    d = RunConfig()
    p.add_argument("--scenario", dest="scenario_file", help="scenario JSON (overrides the generator)")
    p.add_argument("--topology", dest="topology_file", help="topology JSON (default: generated)")
    p.add_argument("--slices", type=int, default=d.slices)
    p.add_argument("--solver", choices=sorted(SOLVERS), default=d.solver)
    p.add_argument("--replications", type=int, default=d.replications)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--time-limit", type=float, default=d.time_limit)
    p.add_argument("--output-dir", default=d.output_dir)
    p.add_argument("--k-paths", type=int, default=d.k_paths)
    p.add_argument("--demands-per-slice", type=int, default=d.demands_per_slice)
    p.add_argument("--demand-scale", type=float, default=d.demand_scale)
    p.add_argument("--queue-weighting", choices=["count", "rate"], default=d.queue_weighting)
    p.add_argument("--link-load-scope", choices=["to_cu", "full_path"], default=d.link_load_scope)
    p.add_argument("--topology-seed", type=int, default=d.topology_seed)
    p.add_argument("--workers", type=int, default=d.workers)
    p.add_argument("--skip-failed", action="store_true", help="heuristic continues after a slice fails")
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall-clock columns (byte-stable output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ran-slice-opt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(sub.add_parser("run", help="solve one slice count, possibly replicated"))
    sweep = sub.add_parser("sweep", help="solve a range of slice counts and emit plot data")
    _add_config_flags(sweep)
    sweep.add_argument("--counts", type=_int_list, default=None, help="comma-separated slice counts (default 5..50)")
    v = sub.add_parser("validate", help="check a placement against a scenario")
    v.add_argument("placement")
    v.add_argument("scenario")
    e = sub.add_parser("export-mps", help="write the MILP of a scenario in MPS format")
    e.add_argument("scenario")
    e.add_argument("out")
    g = sub.add_parser("gen-topology", help="write the default tiered topology as JSON")
    g.add_argument("--out")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--ring-size", type=int, default=4)
    g.add_argument("--tiers", type=_int_list, default=None, help="site counts per tier, e.g. 32,12,5,2")
    g.add_argument("--links", type=int, default=None,
                   help="bidirectional link target (default 70 for the default tiers, none otherwise)")
    return parser


def _apply_env(parser: argparse.ArgumentParser, command: str, environ) -> None:
    """Turn RSO_* variables into parser defaults for the chosen sub-command."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    for action in sub._actions:
        key = ENV_PREFIX + action.dest.upper()
        if action.dest == "help" or key not in environ:
            continue
        raw = environ[key]
        if isinstance(action, argparse._StoreTrueAction):
            val = raw.strip().lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            val = action.type(raw)
        else:
            val = raw
        sub.set_defaults(**{action.dest: val})


def main(argv=None, environ=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    environ = os.environ if environ is None else environ
    parser = build_parser()
    command = next((a for a in argv if not a.startswith("-")), None)
    if command in ("run", "sweep", "validate", "export-mps", "gen-topology"):
        try:
            _apply_env(parser, command, environ)
        except ValueError as e:
            print(f"error: bad environment override: {e}", file=sys.stderr)
            return EXIT_ERROR
    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
            if args.command == "sweep":
                fields["slice_counts"] = args.counts or []
            cfg = RunConfig(**fields)
            return cmd_run(cfg) if args.command == "run" else cmd_sweep(cfg)
        if args.command == "validate":
            return cmd_validate(args.placement, args.scenario)
        if args.command == "export-mps":
            return cmd_export_mps(args.scenario, args.out)
        tiers = dict(zip(range(4), args.tiers)) if args.tiers else dict(DEFAULT_TIER_COUNTS)
        return cmd_gen_topology(args.out, args.seed, args.ring_size, tiers, args.links)
    except (ConfigError, ScenarioError, TopologyError, PlacementError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
