"""Walk through a single ride-sharing day on a small grid.

Two drivers and four riders; the PSO matcher plans the day up front, then
the tick loop moves vehicles, picks riders up and drops them off. Prints
each match, the resulting routes and the altruism point transfers.
"""

import numpy as np

from arsim.baselines import PsoParams
from arsim.env import DayEnv
from arsim.grid import CellCoord, GridWorld, TripSpec
from arsim.metrics import acceptance_rate, detour_factor
from arsim.sim import PsoMatcher


def trip(ox, oy, dx, dy):
    return TripSpec(CellCoord(ox, oy), CellCoord(dx, dy))


def main():
    g = GridWorld(8, 8, 0.28)
    drivers = {0: trip(0, 0, 7, 1), 1: trip(0, 6, 7, 7)}
    riders = {2: trip(1, 0, 6, 1), 3: trip(2, 1, 7, 0), 4: trip(1, 6, 5, 7), 5: trip(7, 7, 0, 0)}
    scores = {0: 0.2, 1: 0.35, 2: 0.8, 3: 0.6, 4: 0.9, 5: 0.7}
    env = DayEnv(g, drivers, riders, scores)

    matcher = PsoMatcher(PsoParams(swarm_size=20, iterations=50), np.random.default_rng(0))
    matcher.begin_day(env)
    for d, r, gain, detour in env.matches:
        print(f"driver {d} takes rider {r}: detour {detour:.2f} km, earns {gain:.4f} points")
    while not env.done:
        env.advance()
    env.check_constraints()
    lg = env.day_log(1)

    for d in env.driver_ids:
        print(f"driver {d}: {lg.driver_route_km[d]:.2f} km driven vs {lg.direct_km[d]:.2f} km alone "
              f"(factor {detour_factor(lg)[d]:.3f}), arrived after {lg.time_min[d]:.1f} min")
    for r in env.rider_ids:
        how = "shared" if lg.served[r] else "drove alone"
        print(f"rider {r}: {how}, {lg.time_min[r]:.1f} min")
    print(f"acceptance rate {acceptance_rate(lg):.2f}; "
          f"vehicle km {sum(lg.vehicle_km.values()):.2f} vs {sum(lg.direct_km.values()):.2f} if everyone drove")

    before = dict(scores)
    env.ledger.apply(scores)
    for aid in sorted(scores):
        if scores[aid] != before[aid]:
            print(f"agent {aid}: score {before[aid]:.3f} -> {scores[aid]:.3f}")


if __name__ == "__main__":
    main()
