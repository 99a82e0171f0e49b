"""Scan tier-0 queueing capacity and demand scale; report SLA failures and CS hosting per slice count.

Used to pick the placeholder defaults in ``topology.DEFAULT_PROQ`` and the CLI ``demand_scale``.

    python3 scripts/tune_defaults.py --ru 7 --du 8 --cu 8 --scale 0.0005 --counts 5,10,20,30,40,50 --reps 5
"""

import argparse
import time

from ranslice.exact import solve_exact
from ranslice.heuristic import solve_first_fit
from ranslice.scenario import generate_scenario
from ranslice.topology import TopologyParams, generate_default_topology
from ranslice.validator import run_metrics


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ru", type=float, default=None)
    ap.add_argument("--du", type=float, default=None)
    ap.add_argument("--cu", type=float, default=None)
    ap.add_argument("--scale", type=float, default=0.0005)
    ap.add_argument("--counts", default="5,10,15,20,25,30,35,40,45,50")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--time-limit", type=float, default=60.0)
    ap.add_argument("--queue-weighting", default="count")
    args = ap.parse_args()

    params = TopologyParams()
    for nf, val in (("RU", args.ru), ("DU", args.du), ("CU", args.cu)):
        if val is not None:
            params.proq[0][nf] = val
    graph = generate_default_topology(params=params)
    for n in [int(c) for c in args.counts.split(",")]:
        h_sla = e_sla = cs = urllc = 0
        worst = 0.0
        statuses = set()
        for r in range(args.reps):
            sc = generate_scenario(graph, n, args.seed + r, demand_scale=args.scale,
                                   queue_weighting=args.queue_weighting)
            t0 = time.perf_counter()
            ex = solve_exact(sc, time_limit=args.time_limit)
            worst = max(worst, time.perf_counter() - t0)
            statuses.add(ex.status.value)
            me = run_metrics(sc, ex)
            mh = run_metrics(sc, solve_first_fit(sc))
            h_sla += mh["sla_violations"]
            e_sla += me["sla_violations"]
            cs += me["urllc_at_cs"]
            urllc += me["urllc_total"]
        print(f"n={n:3d} heuristic_sla={h_sla:3d} exact_sla={e_sla:3d} exact={sorted(statuses)} "
              f"urllc_at_cs={cs}/{urllc} worst_exact={worst:.2f}s", flush=True)


if __name__ == "__main__":
    main()
