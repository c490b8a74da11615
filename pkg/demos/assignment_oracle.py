"""PSO against exhaustive search on small assignment problems.

For a batch of random instances with up to three drivers and four riders,
enumerates every valid assignment to find the best fitness and compares
the swarm's answer to it.
"""

import numpy as np

from arsim.baselines import DayState, PsoParams, brute_force_optimal, fitness, pso_solve
from arsim.grid import GridWorld
from arsim.ingest import synthetic_trips


def main(n=20):
    p = PsoParams()
    g = GridWorld(8, 8, 0.28)
    gaps = []
    for seed in range(n):
        rng = np.random.default_rng(seed)
        nd, nr = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        trips = synthetic_trips(g, nd + nr, rng)
        state = DayState(g, {i: trips[i] for i in range(nd)}, {nd + k: trips[nd + k] for k in range(nr)},
                         {i: float(rng.random()) for i in range(nd + nr)})
        best = brute_force_optimal(state, p.alpha_r, p.beta_pso)
        swarm = pso_solve(state, p, np.random.default_rng(seed))
        fb, fs = fitness(best, state, p.alpha_r, p.beta_pso), fitness(swarm, state, p.alpha_r, p.beta_pso)
        gaps.append(fb - fs)
        print(f"instance {seed:2d}: {nd} drivers {nr} riders  optimum {fb:8.4f}  pso {fs:8.4f}  "
              f"routes {dict(best.routes)}")
    gaps = np.array(gaps)
    print(f"pso matched the optimum on {np.sum(gaps < 1e-9)}/{n} instances; worst gap {gaps.max():.4f}")


if __name__ == "__main__":
    main()
