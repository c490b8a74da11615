"""Multi-day simulation loop, matchers, MADDPG pretraining and output tables."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import metrics as M
from .baselines import DayState, PsoParams, pso_solve
from .economy import EconomyParams
from .env import DayConfig, DayEnv, DayLog
from .errors import ConfigError, ContractViolation
from .grid import GridWorld, TOLERANCE_MULT
from .ingest import load_trips, stratified_sample, synthetic_trips
from .marl.maddpg import MaddpgMatcher, PolicyBundle, TrainConfig, load_bundle, make_replay, train_from_replay
from .population import ACTIVE, AgentRecord, LifecycleState, PopulationCensus, PopulationParams, step_population
from .rng import make_streams
from .roles import RIDER, assign_roles

log = logging.getLogger(__name__)

INIT_MODES = ("uniform", "gaussian")
POPULATION_MODES = ("fixed", "birth-death")
MATCHERS = ("maddpg", "pso", "none")
GAUSSIAN_MEAN = 0.5
GAUSSIAN_SD = 0.15


# -- configuration ----------------------------------------------------------------


@dataclass
class GridSettings:
    width: int = 15
    height: int = 15
    cell_km: float = 0.28
    matrix_file: str = None

    def build(self):
        if self.matrix_file:
            return GridWorld.from_file(self.matrix_file)
        return GridWorld(self.width, self.height, self.cell_km)


@dataclass
class MarlSettings:
    checkpoint: str = None
    n_slots: int = None
    train_episodes: int = 150
    updates_per_day: int = 8
    eval_greedy: bool = True
    actor_lr: float = 0.001
    critic_lr: float = 0.01
    gamma: float = 0.95
    tau: float = 0.01
    batch_size: int = 32
    buffer_capacity: int = 5000
    priority_exponent: float = 0.6
    is_exponent: float = 0.4
    explore_start: float = 0.5
    explore_end: float = 0.02
    explore_episodes: int = 100
    hidden_actor: tuple = (64, 64)
    hidden_critic: tuple = (128, 64)
    max_grad_norm: float = 10.0

    def train_config(self):
        return TrainConfig(
            actor_lr=self.actor_lr, critic_lr=self.critic_lr, gamma=self.gamma, tau=self.tau,
            batch_size=self.batch_size, buffer_capacity=self.buffer_capacity,
            priority_exponent=self.priority_exponent, is_exponent=self.is_exponent,
            explore_start=self.explore_start, explore_end=self.explore_end,
            explore_episodes=self.explore_episodes, episodes=self.train_episodes,
            updates_per_day=self.updates_per_day, hidden_actor=tuple(self.hidden_actor),
            hidden_critic=tuple(self.hidden_critic), max_grad_norm=self.max_grad_norm,
        )


@dataclass
class MetricsSettings:
    co2_per_km: float = M.CO2_KG_PER_KM
    dense_threshold: float = 0.5
    ratio_level: float = 0.99
    lorenz_grid: int = 21
    reint_alpha: float = 0.25
    reint_beta: float = 0.25
    reint_gamma: float = 0.25
    reint_delta: float = 0.25
    reint_lambda: float = 0.2
    reint_tau: float = 3.0

    def weights(self):
        return M.ReintegrationWeights(self.reint_alpha, self.reint_beta, self.reint_gamma, self.reint_delta, self.reint_lambda, self.reint_tau)


@dataclass
class SimulationConfig:
    agents: int = 100
    days: int = 100
    init: str = "uniform"
    population: str = "fixed"
    matcher: str = "maddpg"
    capacity: int = 4
    capacities: dict = None
    seed: int = 0
    trips: str = "synthetic"
    trip_pool: int = 5000
    sample_bins: int = 5
    pickup_radius_cells: float = 3.0
    tolerance_mult: float = TOLERANCE_MULT
    alpha_r: float = 0.5
    theta_frac: float = 0.15
    normalize_reward: bool = True
    tick_cap_mult: int = 4
    unserved_solo: bool = True
    grid: GridSettings = field(default_factory=GridSettings)
    economy: EconomyParams = field(default_factory=EconomyParams)
    population_params: PopulationParams = field(default_factory=PopulationParams)
    marl: MarlSettings = field(default_factory=MarlSettings)
    pso: PsoParams = field(default_factory=PsoParams)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)

    def validate(self):
        if not isinstance(self.agents, int) or self.agents < 2:
            raise ConfigError("agents", f"must be an integer >= 2, got {self.agents!r}")
        if not isinstance(self.days, int) or self.days < 1:
            raise ConfigError("days", f"must be an integer >= 1, got {self.days!r}")
        if self.init not in INIT_MODES:
            raise ConfigError("init", f"must be one of {INIT_MODES}, got {self.init!r}")
        if self.population not in POPULATION_MODES:
            raise ConfigError("population", f"must be one of {POPULATION_MODES}, got {self.population!r}")
        if self.matcher not in MATCHERS:
            raise ConfigError("matcher", f"must be one of {MATCHERS}, got {self.matcher!r}")
        if not isinstance(self.capacity, int) or self.capacity < 1:
            raise ConfigError("capacity", f"must be an integer >= 1, got {self.capacity!r}")
        for aid, cap in (self.capacities or {}).items():
            if int(cap) < 1:
                raise ConfigError("capacities", f"agent {aid} capacity must be >= 1")
        if self.pickup_radius_cells < 0:
            raise ConfigError("pickup_radius_cells", "must be nonnegative")
        if self.tolerance_mult < 1:
            raise ConfigError("tolerance_mult", "must be >= 1")
        if not 0 <= self.alpha_r <= 1:
            raise ConfigError("alpha_r", "must lie in [0, 1]")
        if self.trip_pool < 1:
            raise ConfigError("trip_pool", "must be >= 1")
        if self.sample_bins < 1:
            raise ConfigError("sample_bins", "must be >= 1")
        if self.tick_cap_mult < 1:
            raise ConfigError("tick_cap_mult", "must be >= 1")
        if self.marl.n_slots is not None and self.marl.n_slots < 1:
            raise ConfigError("marl.n_slots", "must be >= 1")
        if self.marl.train_episodes < 0:
            raise ConfigError("marl.train_episodes", "must be >= 0")
        return self

    @property
    def n_slots(self):
        return self.marl.n_slots or self.agents

    def day_config(self):
        return DayConfig(
            capacity=self.capacity,
            pickup_radius_cells=self.pickup_radius_cells,
            tolerance_mult=self.tolerance_mult,
            economy=self.economy,
            alpha_r=self.alpha_r,
            theta_frac=self.theta_frac,
            normalize_reward=self.normalize_reward,
            tick_cap_mult=self.tick_cap_mult,
            unserved_solo=self.unserved_solo,
        )

    def to_dict(self):
        return asdict(self)

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


# -- matchers ---------------------------------------------------------------------


class NoMatcher:
    name = "none"

    def begin_day(self, env):
        pass

    def act(self, env):
        pass

    def end_day(self, env):
        pass


class PsoMatcher:
    """Solves the whole day up front and commits every pickup at tick 0."""

    name = "pso"

    def __init__(self, params: PsoParams, rng):
        self.params = params
        self.rng = rng

    def begin_day(self, env):
        state = DayState(env.g, env.drivers, env.riders, env.scores, env.capacities or env.cfg.capacity, env.cfg.economy, env.cfg.tolerance_mult)
        if isinstance(state.capacity, dict):
            state.capacity = {d: env.capacity(d) for d in env.driver_ids}
        best = pso_solve(state, self.params, self.rng)
        for d in env.driver_ids:
            for r in best.routes.get(d, ()):
                env.assign(d, r, enforce_radius=False)

    def act(self, env):
        pass

    def end_day(self, env):
        pass


# -- simulation state -------------------------------------------------------------


def initial_scores(mode, n, rng):
    if mode == "uniform":
        return rng.random(n)
    return np.clip(rng.normal(GAUSSIAN_MEAN, GAUSSIAN_SD, n), 0.0, 1.0)


@dataclass
class SimulationReport:
    config: SimulationConfig
    logs: list
    final_scores: dict
    census: list
    tables: dict = field(default_factory=dict)
    checkpoint: str = None


class Simulation:
    """Owns the population, scores and random streams of one run."""

    def __init__(self, cfg: SimulationConfig, streams=None):
        self.cfg = cfg.validate()
        self.streams = streams or make_streams(cfg.seed)
        self.grid = cfg.grid.build()
        self.day_cfg = cfg.day_config()
        if cfg.trips == "synthetic":
            self.pool = synthetic_trips(self.grid, cfg.trip_pool, self.streams["pool"])
        else:
            self.pool = load_trips(cfg.trips)
            for t in self.pool:
                self.grid.index(t.origin)
                self.grid.index(t.destination)
        scores = initial_scores(cfg.init, cfg.agents, self.streams["init"])
        self.roster = {}
        bd = cfg.population == "birth-death"
        n_start = int(round(cfg.population_params.initial_active_fraction * cfg.agents)) if bd else cfg.agents
        for i in range(cfg.agents):
            st = LifecycleState(ACTIVE) if i < n_start else LifecycleState()
            self.roster[i] = AgentRecord(i, float(scores[i]), st)
        self.census = PopulationCensus.from_roster(self.roster)
        self.recent_dropout_rate = 0.0
        self.day = 0

    @property
    def scores(self):
        return {i: a.score for i, a in self.roster.items()}

    def start_day(self):
        """Population step, role draw and trip binding; returns a fresh env."""
        cfg = self.cfg
        self.day += 1
        events = None
        if cfg.population == "birth-death":
            before = self.census.n_active
            events, self.census = step_population(
                self.roster, self.census, self.day, self.streams["population"], cfg.population_params, cfg.days, self.recent_dropout_rate
            )
            self.recent_dropout_rate = len(events.dropouts) / before if before else 0.0
        active = sorted(i for i, a in self.roster.items() if a.active)
        trips = stratified_sample(self.pool, cfg.agents, cfg.sample_bins, self.streams["trips"], self.grid)
        if len(active) < 1:
            return None, events
        roles = assign_roles(active, self.scores, self.streams["roles"])
        drivers = {i: trips[i] for i in active if roles[i] != RIDER}
        riders = {i: trips[i] for i in active if roles[i] == RIDER}
        caps = {int(k): int(v) for k, v in (cfg.capacities or {}).items() if int(k) in drivers}
        env = DayEnv(self.grid, drivers, riders, self.scores, self.day_cfg, caps)
        return env, events

    def finish_day(self, env, events):
        env.check_constraints()
        lg = env.day_log(self.day)
        if events is not None:
            lg.births = list(events.births)
            lg.dropouts = list(events.dropouts)
            lg.returns = [tuple(r) for r in events.returns]
        scores = self.scores
        env.ledger.apply(scores)
        for i, s in scores.items():
            self.roster[i].score = s
        lg.scores = {i: scores[i] for i in sorted(scores)}
        return lg

    def empty_log(self, events):
        g = self.grid
        lg = DayLog(self.day, {}, {}, {}, {}, {}, {}, {}, [], np.zeros((g.height, g.width)), np.zeros((g.height, g.width)),
                    self.day_cfg.tick_cap_mult * g.diameter_cells, {}, self.scores)
        if events is not None:
            lg.births, lg.dropouts, lg.returns = list(events.births), list(events.dropouts), list(events.returns)
        return lg

    def run_day(self, matcher):
        env, events = self.start_day()
        if env is None:
            return self.empty_log(events)
        return run_day_env(env, matcher, self, events)


def run_day_env(env, matcher, sim: Simulation, events):
    matcher.begin_day(env)
    while not env.done:
        matcher.act(env)
        env.advance()
    matcher.end_day(env)
    return sim.finish_day(env, events)


def run_day(sim: Simulation, matcher):
    """Simulate one more day of ``sim`` with ``matcher``; returns its log."""
    return sim.run_day(matcher)


# -- MADDPG -----------------------------------------------------------------------


def pretrain_maddpg(cfg: SimulationConfig, episodes=None, progress=None):
    """Train a shared actor/critic on simulated days; returns the bundle.

    Training runs its own simulation seeded from the run's ``train`` stream,
    so evaluation days never share draws with training days.
    """
    cfg.validate()
    tcfg = cfg.marl.train_config()
    episodes = tcfg.episodes if episodes is None else episodes
    root = make_streams(cfg.seed)["train"]
    train_streams = make_streams(int(root.integers(2**62)))
    net_rng = np.random.default_rng(int(root.integers(2**62)))
    bundle = PolicyBundle.create(cfg.agents, cfg.n_slots, tcfg, net_rng)
    replay = make_replay(tcfg)
    sim = Simulation(cfg, train_streams)
    matcher = MaddpgMatcher(bundle, train_streams["explore"], greedy=False, replay=replay)
    history = []
    for ep in range(episodes):
        if sim.day >= cfg.days:
            sim = Simulation(cfg, train_streams)
        matcher.explore = tcfg.explore_rate(ep)
        lg = sim.run_day(matcher)
        losses = train_from_replay(bundle, replay, train_streams["explore"], tcfg.updates_per_day)
        history.append((ep, M.day_distance(lg), lg.total_reward, losses))
        if progress:
            progress(ep, lg, losses)
    return bundle, history


BUNDLED_CHECKPOINT = Path(__file__).parent / "data" / "maddpg_n{agents}.npz"


def bundled_checkpoint(cfg: SimulationConfig):
    """Path of the shipped actor checkpoint matching ``cfg``'s shapes, if any."""
    path = Path(str(BUNDLED_CHECKPOINT).format(agents=cfg.agents))
    if not path.exists() or cfg.n_slots != cfg.agents or tuple(cfg.marl.hidden_actor) != (64, 64):
        return None
    return path


def build_matcher(cfg: SimulationConfig, streams, bundle=None):
    if cfg.matcher == "none":
        return NoMatcher()
    if cfg.matcher == "pso":
        return PsoMatcher(cfg.pso, streams["pso"])
    if bundle is None:
        ckpt = cfg.marl.checkpoint or bundled_checkpoint(cfg)
        if ckpt:
            bundle, _ = load_bundle(ckpt, cfg.marl.train_config())
            if bundle.n_agents != cfg.agents or bundle.n_slots != cfg.n_slots:
                raise ConfigError(
                    "marl.checkpoint",
                    f"checkpoint shaped for {bundle.n_agents} agents/{bundle.n_slots} slots, run needs {cfg.agents}/{cfg.n_slots}",
                )
        else:
            log.info("no checkpoint given; pretraining for %d days", cfg.marl.train_episodes)
            bundle, _ = pretrain_maddpg(cfg)
    return MaddpgMatcher(bundle, streams["explore"], explore=0.0, greedy=cfg.marl.eval_greedy)


def run_simulation(cfg: SimulationConfig, bundle=None, out_dir=None):
    """Run ``cfg.days`` days and compute every metric table."""
    cfg.validate()
    sim = Simulation(cfg)
    matcher = build_matcher(cfg, sim.streams, bundle)
    logs, census = [], []
    for _ in range(cfg.days):
        lg = sim.run_day(matcher)
        logs.append(lg)
        census.append(sim.census)
    report = SimulationReport(cfg, logs, sim.scores, census)
    if cfg.matcher == "maddpg" and bundle is None:
        ckpt = cfg.marl.checkpoint or bundled_checkpoint(cfg)
        report.checkpoint = str(ckpt) if ckpt else "pretrained-in-run"
    report.tables = build_tables(logs, cfg.metrics, census)
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


# -- output tables ----------------------------------------------------------------


def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6f}"


def _table(header, rows):
    lines = ["# " + " ".join(header)]
    lines += [" ".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _grid_text(a):
    return "\n".join(" ".join(f"{v:.6f}" for v in row) for row in np.asarray(a)) + "\n"


def build_tables(logs, mcfg: MetricsSettings = None, census=None):
    """Text tables keyed by file name."""
    mcfg = mcfg or MetricsSettings()
    t = {}
    rows = []
    for lg in logs:
        km = M.day_distance(lg)
        rows.append((lg.day, km, km * mcfg.co2_per_km))
    t["distance.dat"] = _table(("day", "distance", "co2"), rows)
    rows = []
    for lg in logs:
        f = list(M.detour_factor(lg).values())
        rows.append((lg.day, np.mean(f) if f else None, np.std(f) if f else None))
    t["detour.dat"] = _table(("day", "mean", "std"), rows)
    t["trip_time.dat"] = _table(("day", "mean"), [(lg.day, M.avg_trip_time(lg)) for lg in logs])
    rows = []
    for lg in logs:
        u = M.vehicle_utilization(lg)
        rows.append((lg.day, u.mean() if u.size else None, u.std() if u.size else None))
    t["utilization.dat"] = _table(("day", "mean", "std"), rows)
    t["acceptance.dat"] = _table(("day", "rate"), [(lg.day, M.acceptance_rate(lg)) for lg in logs])
    rows = []
    for lg in logs:
        dens = float(lg.density.sum()) / lg.horizon_ticks
        solo = float(lg.solo_density.sum()) / lg.horizon_ticks
        rows.append((lg.day, dens, solo, int(np.sum(lg.density / lg.horizon_ticks > mcfg.dense_threshold))))
    t["density.dat"] = _table(("day", "shared", "solo", "dense"), rows)
    shared, dense, solo, diff = M.traffic_density(logs, mcfg.dense_threshold)
    t["density_map.dat"] = _grid_text(shared)
    t["density_solo_map.dat"] = _grid_text(solo)
    t["density_diff_map.dat"] = _grid_text(diff)
    rows = [(lg.day, lg.n_drivers, lg.n_riders, lg.n_drivers / lg.n_riders if lg.n_riders else None) for lg in logs]
    t["ratio.dat"] = _table(("day", "drivers", "riders", "ratio"), rows)
    rows = []
    for k, lg in enumerate(logs):
        c = census[k] if census else None
        rows.append((lg.day, c.n_active if c else len(lg.roles), c.n_never if c else 0, c.n_dropout if c else 0,
                     len(lg.births), len(lg.dropouts), len(lg.returns)))
    t["population.dat"] = _table(("day", "active", "never", "inactive", "births", "dropouts", "returns"), rows)
    final = logs[-1].scores if logs else {}
    t["altruism.dat"] = _table(("agent", "score"), [(i, final[i]) for i in sorted(final)])
    t["altruism_daily.dat"] = _table(("day", "mean", "std"), [(lg.day, np.mean(list(lg.scores.values())), np.std(list(lg.scores.values()))) for lg in logs])

    ids, personal, community = M.agent_benefits(logs)
    summary = []
    if ids:
        lz = M.lorenz_and_gini(personal, community, mcfg.lorenz_grid)
        p, _ = M.floor_benefits(personal)
        c, _ = M.floor_benefits(community)
        xp, yp = M.lorenz_curve(p)
        _, yc = M.lorenz_curve(c)
        t["lorenz.dat"] = _table(("share", "distance", "traffic"), list(zip(xp, yp, yc)))
        t["lorenz_surface.dat"] = _grid_text(lz["surface"])
        t["benefits.dat"] = _table(("agent", "distance_saved", "traffic_saved"), list(zip(ids, personal, community)))
        summary += [("gini_distance", lz["gini_distance"]), ("gini_traffic", lz["gini_traffic"]),
                    ("floored_distance", lz["floored_distance"]), ("floored_traffic", lz["floored_traffic"])]
    dropouts = [(a, lg.day) for lg in logs for a in lg.dropouts]
    returns = [tuple(r) for lg in logs for r in lg.returns]
    rs = M.reintegration_score(dropouts, returns, mcfg.weights())
    t["reintegration.dat"] = _named_table(rs)
    km, co2 = M.total_distance_and_co2(logs, mcfg.co2_per_km)
    summary = [("total_distance", km), ("total_co2", co2)] + summary
    ratios = M.driver_rider_ratios(logs)
    if len(ratios) >= 2:
        mean, sd, cv, lo, hi = M.ratio_confidence_interval(ratios, mcfg.ratio_level)
        summary += [("ratio_mean", mean), ("ratio_sd", sd), ("ratio_cv", cv), ("ratio_ci_low", lo), ("ratio_ci_high", hi)]
    util = [x for lg in logs for x in [M.vehicle_utilization(lg)] if x.size]
    if util:
        summary.append(("utilization_mean", float(np.mean([u.mean() for u in util]))))
    det = [v for lg in logs for v in M.detour_factor(lg).values()]
    if det:
        summary.append(("detour_mean", float(np.mean(det))))
    acc = [a for a in (M.acceptance_rate(lg) for lg in logs) if a is not None]
    if acc:
        summary.append(("acceptance_mean", float(np.mean(acc))))
    summary.append(("trip_time_mean", float(np.mean([M.avg_trip_time(lg) for lg in logs])) if logs else None))
    summary.append(("density_reduction", M.density_reduction(logs)))
    summary.append(("dense_cells", dense))
    t["summary.dat"] = _named_table(dict(summary))
    return t


def _named_table(values: dict):
    lines = ["# metric value"]
    for k, v in values.items():
        lines.append(f"{k} {_fmt(v) if v is not None else 'na'}")
    return "\n".join(lines) + "\n"


def parse_named_table(text):
    out = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        k, v = line.split()
        out[k] = None if v == "na" else float(v)
    return out


def write_outputs(report: SimulationReport, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in report.tables.items():
        (out / name).write_text(text)
    with (out / "daylogs.jsonl").open("w") as fh:
        for lg in report.logs:
            fh.write(json.dumps(_jsonable(lg.to_dict()), sort_keys=True) + "\n")
    manifest = {
        "config_sha256": report.config.digest(),
        "seed": report.config.seed,
        "version": __version__,
        "matcher": report.config.matcher,
        "days": report.config.days,
        "agents": report.config.agents,
        "checkpoint": report.checkpoint,
        "tables": sorted(report.tables),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(_jsonable(report.config.to_dict()), indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def read_day_logs(path):
    with Path(path).open() as fh:
        return [DayLog.from_dict(json.loads(line)) for line in fh if line.strip()]


def check_day_constraints(lg: DayLog, tolerance_mult=TOLERANCE_MULT, capacity=4):
    """Raise if any driver broke the detour tolerance or capacity."""
    for d, route in lg.driver_route_km.items():
        if route > tolerance_mult * lg.direct_km[d] + 1e-6:
            raise ContractViolation(f"day {lg.day}: driver {d} route {route:.3f} exceeds tolerance")
        if lg.driver_riders[d] > capacity:
            raise ContractViolation(f"day {lg.day}: driver {d} carried {lg.driver_riders[d]} riders")
