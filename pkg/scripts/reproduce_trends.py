"""Run the 5..50-slice sweep (10 replications, both solvers) and print the per-count trend table.

Writes the same CSV/SVG outputs as ``ran-slice-opt sweep`` into --output-dir.

    python3 scripts/reproduce_trends.py --output-dir results/trends --workers 1
"""

import argparse
import math
from pathlib import Path

from ranslice.cli import RunConfig, run_points, write_figures, write_tables


def _mean(values):
    vals = [v for v in values if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--output-dir", default="results/trends")
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--counts", default=",".join(str(n) for n in range(5, 55, 5)))
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--demand-scale", type=float, default=RunConfig.demand_scale)
    args = ap.parse_args()

    counts = [int(c) for c in args.counts.split(",")]
    cfg = RunConfig(solver="both", replications=args.replications, seed=args.seed, workers=args.workers,
                    demand_scale=args.demand_scale, time_limit=300.0, output_dir=args.output_dir)
    points = run_points(cfg, [(n, r) for n in counts for r in range(cfg.replications)])
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tables(cfg, points, out)
    write_figures(cfg, points, out)

    print(f"{'slices':>6} {'sla_heur':>8} {'sla_exact':>9} {'util_exact':>10} {'mMTC_ms':>8} "
          f"{'urllc_cs_exact':>14} {'urllc_cs_heur':>13} {'worst_exact_s':>13}")
    for n in counts:
        runs = [p["solvers"] for p in points if p["n"] == n]
        h, e = [r["heuristic"]["metrics"] for r in runs], [r["exact"]["metrics"] for r in runs]
        print(f"{n:>6} {sum(m['sla_violations'] for m in h):>8} {sum(m['sla_violations'] for m in e):>9} "
              f"{_mean([m['avg_server_util'] for m in e]):>10.4f} "
              f"{_mean([m['delay']['mMTC'] for m in e]) * 1e3:>8.3f} "
              f"{sum(m['urllc_at_cs'] for m in e):>6}/{sum(m['urllc_total'] for m in e):<7} "
              f"{sum(m['urllc_at_cs'] for m in h):>6}/{sum(m['urllc_total'] for m in h):<6} "
              f"{max(r['exact']['runtime'] for r in runs):>13.2f}")


if __name__ == "__main__":
    main()
