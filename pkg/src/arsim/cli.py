"""Command line entry point: ``arsim {simulate,train,ingest,oracle,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from .baselines import DayState, PsoParams, brute_force_optimal, fitness, pso_solve
from .config import load_config
from .errors import InputError
from .grid import GridWorld
from .ingest import DEFAULT_COLUMNS, StudyWindow, default_window, ingest_file, save_trips, stratified_sample, synthetic_trips
from .marl.maddpg import save_bundle
from .sim import build_tables, pretrain_maddpg, read_day_logs, run_simulation

log = logging.getLogger("arsim")

EXIT_OK = 0
EXIT_INVALID = 2


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _sim_flags(p):
    p.add_argument("--config", help="YAML or JSON config file")
    p.add_argument("--agents", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--init", choices=("uniform", "gaussian"))
    p.add_argument("--population", choices=("fixed", "birth-death"))
    p.add_argument("--matcher", choices=("maddpg", "pso", "none"))
    p.add_argument("--capacity", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trips", help="grid trips file (default: synthetic)")
    p.add_argument("--radius", type=float, dest="pickup_radius_cells", help="pickup radius in cells")
    p.add_argument("--unserved-solo", type=_bool, dest="unserved_solo")
    p.add_argument("--checkpoint", help="MADDPG checkpoint file")
    p.add_argument("--n-slots", type=int, dest="n_slots")


def _overrides(args):
    sim = {}
    for key in ("agents", "days", "init", "population", "matcher", "capacity", "seed", "trips", "pickup_radius_cells", "unserved_solo"):
        v = getattr(args, key, None)
        if v is not None:
            sim[key] = v
    tree = {"sim": sim}
    marl = {}
    if getattr(args, "checkpoint", None):
        marl["checkpoint"] = args.checkpoint
    if getattr(args, "n_slots", None) is not None:
        marl["n_slots"] = args.n_slots
    if getattr(args, "episodes", None) is not None:
        marl["train_episodes"] = args.episodes
    if marl:
        tree["marl"] = marl
    return tree


def cmd_simulate(args):
    cfg = load_config(args.config, _overrides(args))
    report = run_simulation(cfg, out_dir=args.out)
    summary = report.tables["summary.dat"]
    print(f"wrote {len(report.tables)} tables to {args.out}")
    print(summary, end="")
    return EXIT_OK


def cmd_train(args):
    cfg = load_config(args.config, _overrides(args))

    def progress(ep, lg, losses):
        if args.verbose:
            km = sum(lg.vehicle_km.values())
            print(f"day {ep + 1}: distance {km:.1f} km, reward {lg.total_reward:.3f}, losses {losses}")

    bundle, history = pretrain_maddpg(cfg, progress=progress)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_bundle(args.out, bundle, {"episodes": len(history), "seed": cfg.seed, "config_sha256": cfg.digest()}, actor_only=args.actor_only)
    print(f"saved checkpoint to {args.out} after {len(history)} training days")
    return EXIT_OK


def _parse_dt(text):
    for fmt in ("%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"):
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise InputError(f"start/end: cannot parse {text!r}")


def cmd_ingest(args):
    cfg = load_config(args.config, {})
    g = cfg.grid.build()
    w = default_window()
    quad = w.quadrilateral
    if args.quad:
        vals = [float(v) for v in args.quad.split(",")]
        if len(vals) != 8:
            raise InputError("quad: expected 8 comma-separated numbers (lon,lat x4)")
        quad = tuple(zip(vals[0::2], vals[1::2]))
    start = _parse_dt(args.start) if args.start else w.start
    end = _parse_dt(args.end) if args.end else w.end
    window = StudyWindow(quad, start, end)
    columns = {k: getattr(args, k) for k in DEFAULT_COLUMNS if getattr(args, k, None)}
    trips, stats = ingest_file(args.input, window, g, columns)
    if args.sample:
        trips = stratified_sample(trips, args.sample, args.bins, np.random.default_rng(args.seed), g)
    save_trips(trips, args.out)
    print(f"rows {stats['rows']} skipped {stats['skipped']} in_window {stats['in_window']} "
          f"same_cell {stats['same_cell']} written {len(trips)} -> {args.out}")
    return EXIT_OK


def cmd_oracle(args):
    if args.drivers < 1 or args.riders < 0:
        raise InputError("drivers/riders: need at least one driver and a nonnegative rider count")
    rng = np.random.default_rng(args.seed)
    g = GridWorld(args.size, args.size, 0.28)
    trips = synthetic_trips(g, args.drivers + args.riders, rng)
    drivers = {i: trips[i] for i in range(args.drivers)}
    riders = {args.drivers + k: trips[args.drivers + k] for k in range(args.riders)}
    scores = {i: float(rng.random()) for i in list(drivers) + list(riders)}
    state = DayState(g, drivers, riders, scores, args.capacity)
    p = PsoParams()
    best = brute_force_optimal(state, p.alpha_r, p.beta_pso)
    f_best = fitness(best, state, p.alpha_r, p.beta_pso)
    pso = pso_solve(state, p, np.random.default_rng(args.seed))
    f_pso = fitness(pso, state, p.alpha_r, p.beta_pso)
    for aid, t in sorted({**drivers, **riders}.items()):
        role = "driver" if aid in drivers else "rider"
        print(f"{role} {aid}: {tuple(t.origin)} -> {tuple(t.destination)}  score {scores[aid]:.3f}")
    print("optimal assignment:")
    for d in state.driver_ids:
        print(f"  driver {d}: {list(best.routes[d])}")
    print(f"optimal fitness {f_best:.6f}")
    print(f"pso fitness {f_pso:.6f}")
    return EXIT_OK


def cmd_report(args):
    logs = read_day_logs(Path(args.logs) / "daylogs.jsonl" if Path(args.logs).is_dir() else args.logs)
    cfg = load_config(args.config, {})
    tables = build_tables(logs, cfg.metrics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (out / name).write_text(text)
    print(f"recomputed {len(tables)} tables from {len(logs)} day logs into {out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="arsim", description="Altruism-driven ride-sharing simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a multi-day simulation and write metric tables")
    _sim_flags(s)
    s.add_argument("--out", default="results", help="output directory")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="pretrain the MADDPG policy and save a checkpoint")
    _sim_flags(t)
    t.add_argument("--episodes", type=int, help="training days")
    t.add_argument("--out", default="maddpg.npz", help="checkpoint path")
    t.add_argument("--actor-only", action="store_true", help="save only the actor (enough for evaluation)")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("ingest", help="convert a TLC trip CSV into a grid trips file")
    i.add_argument("input")
    i.add_argument("--out", required=True)
    i.add_argument("--config")
    i.add_argument("--start", help="window start, e.g. '2016-01-02 09:00:00'")
    i.add_argument("--end", help="window end (exclusive)")
    i.add_argument("--quad", help="lon1,lat1,...,lon4,lat4")
    i.add_argument("--sample", type=int, help="stratified sample size")
    i.add_argument("--bins", type=int, default=5)
    i.add_argument("--seed", type=int, default=0)
    for key in DEFAULT_COLUMNS:
        i.add_argument("--" + key.replace("_", "-"), dest=key)
    i.set_defaults(func=cmd_ingest)

    o = sub.add_parser("oracle", help="brute-force a small assignment instance")
    o.add_argument("--drivers", type=int, default=2)
    o.add_argument("--riders", type=int, default=3)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--size", type=int, default=6, help="grid side in cells")
    o.add_argument("--capacity", type=int, default=4)
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("report", help="recompute metric tables from saved day logs")
    r.add_argument("--logs", required=True, help="output directory or daylogs.jsonl file")
    r.add_argument("--out", required=True)
    r.add_argument("--config")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
