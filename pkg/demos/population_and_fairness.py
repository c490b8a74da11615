"""Birth-death population run with fairness and reintegration analysis.

Agents join, drop out and return over the horizon. At the end the script
prints the census trajectory, the driver/rider balance with its 99%
confidence interval, the Gini coefficients of the two benefit axes with a
coarse Lorenz curve, and the reintegration components.
"""

import sys

import numpy as np

from arsim import metrics as M
from arsim.sim import SimulationConfig, run_simulation


def main(days=40, seed=0):
    cfg = SimulationConfig(matcher="maddpg", population="birth-death", days=days, seed=seed)
    rep = run_simulation(cfg)

    active = [c.n_active for c in rep.census]
    print("active agents every 5 days:", active[::5])

    ratios = M.driver_rider_ratios(rep.logs)
    mean, sd, cv, lo, hi = M.ratio_confidence_interval(ratios)
    print(f"drivers per rider {mean:.3f} +- {sd:.3f}, 99% CI [{lo:.3f}, {hi:.3f}]")

    ids, personal, community = M.agent_benefits(rep.logs)
    lz = M.lorenz_and_gini(personal, community)
    print(f"gini distance {lz['gini_distance']:.3f}, traffic {lz['gini_traffic']:.3f} "
          f"({lz['floored_distance']} agents with a net distance loss floored at 0)")
    x, y = M.lorenz_curve(np.maximum(personal, 0))
    for q in (0.25, 0.5, 0.75, 0.9):
        k = int(round(q * (len(x) - 1)))
        print(f"  poorest {x[k]:.0%} of agents hold {y[k]:.1%} of distance savings")

    dropouts = [(a, lg.day) for lg in rep.logs for a in lg.dropouts]
    returns = [r for lg in rep.logs for r in lg.returns]
    r = M.reintegration_score(dropouts, returns, cfg.metrics.weights())
    if r["reint"] is None:
        print("no dropouts, reintegration not applicable")
    else:
        print(f"{len(dropouts)} dropouts, {len(returns)} returns, mean gap {r['mean_return_days'] or 0:.2f} days")
        print("REINT {reint:.2f} (basic {r_basic:.3f}, time {r_time:.3f}, quick {r_quick:.3f}, stable {r_stable:.3f})".format(**r))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 40)
