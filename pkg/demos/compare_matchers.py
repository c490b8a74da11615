"""Compare no-sharing, PSO and MADDPG on the same sampled trips.

Runs the three matchers for a few days at the default 100-agent scale
(MADDPG uses the bundled pretrained actor) and prints the headline
efficiency metrics side by side. Pass a day count as the first argument;
PSO takes roughly four seconds per simulated day.
"""

import sys
import time

from arsim.sim import SimulationConfig, parse_named_table, run_simulation

KEYS = ("total_distance", "utilization_mean", "detour_mean", "acceptance_mean", "trip_time_mean", "density_reduction")


def main(days=10, seed=0):
    rows = {}
    for matcher in ("none", "pso", "maddpg"):
        t = time.perf_counter()
        rep = run_simulation(SimulationConfig(matcher=matcher, days=days, seed=seed))
        rows[matcher] = parse_named_table(rep.tables["summary.dat"])
        print(f"{matcher}: {time.perf_counter() - t:.1f} s")
    print(f"{'metric':20s}" + "".join(f"{m:>12s}" for m in rows))
    for k in KEYS:
        vals = [rows[m].get(k) for m in rows]
        print(f"{k:20s}" + "".join(f"{float('nan') if v is None else v:12.3f}" for v in vals))
    base = rows["none"]["total_distance"]
    for m in ("pso", "maddpg"):
        print(f"{m} saves {1 - rows[m]['total_distance'] / base:.1%} of no-sharing distance")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
