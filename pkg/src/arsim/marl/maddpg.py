"""Centralized-critic, decentralized-actor matching policy.

One actor and one critic are shared by every driver. The actor maps a
28-value local observation to logits over rider slots plus a trailing
decline action; infeasible slots are masked before the softmax. The critic
scores a joint observation/action vector with the scored agent's block
placed first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..economy import driver_gain
from ..errors import ContractViolation, InputError, NumericError
from .nets import Adam, NeuralNet, check_finite, masked_softmax
from .replay import PrioritizedReplay

OBS_DIM = 28
VIEW = 5
DETOUR_PENALTY_HIGH = 1.5


# -- observation, masking, reward ----------------------------------------------


def build_observation(grid, pos, is_driver, rider_counts):
    """Scaled position, role bit, and a 5x5 rider-count window (-1 off-grid)."""
    h, w = rider_counts.shape
    half = VIEW // 2
    padded = np.full((h + 2 * half, w + 2 * half), -1.0)
    padded[half : half + h, half : half + w] = rider_counts
    window = padded[pos[1] : pos[1] + VIEW, pos[0] : pos[0] + VIEW]
    sx = pos[0] / (grid.width - 1) if grid.width > 1 else 0.0
    sy = pos[1] / (grid.height - 1) if grid.height > 1 else 0.0
    return np.concatenate(([sx, sy, 1.0 if is_driver else 0.0], window.ravel()))


def env_observation(env, agent):
    st = env.states.get(agent)
    if st is not None:
        return build_observation(env.g, st.pos, True, env.waiting_grid)
    return build_observation(env.g, env.riders[agent].origin, False, env.waiting_grid)


def action_mask(env, driver, n_slots):
    """Boolean vector over ``n_slots`` rider slots plus decline (always true)."""
    mask = np.zeros(n_slots + 1, dtype=bool)
    mask[n_slots] = True
    for r in env.feasible(driver):
        k = env.slot_of.get(r)
        if k is not None and k < n_slots:
            mask[k] = True
    return mask


def detour_weight(detour, theta):
    return 1.0 if detour <= theta else DETOUR_PENALTY_HIGH


def reward_value(direct_km, detour_km, gain, alpha_r, theta, scale=1.0):
    """``alpha_r*d_j - (1-alpha_r)*w*detour + gain`` with km divided by ``scale``."""
    w = detour_weight(detour_km, theta)
    return alpha_r * direct_km / scale - (1 - alpha_r) * w * detour_km / scale + gain


def pick_reward(env, driver, rider):
    """Reward for driver ``driver`` committing to ``rider`` in the current state."""
    if rider is None:
        return 0.0
    if rider not in env.waiting:
        raise ContractViolation(f"rider {rider} is not waiting")
    st = env.states[driver]
    if len(st.seq) >= env.capacity(driver):
        raise ContractViolation(f"driver {driver} is at capacity")
    if st.total_with(env.g, rider, env.riders[rider]) > env.cfg.tolerance_mult * env.direct[driver] + 1e-9:
        raise ContractViolation(f"rider {rider} is infeasible for driver {driver}")
    cfg = env.cfg
    g = env.g
    detour_km = max(env.marginal_detour(driver, rider), 0.0)
    theta = cfg.theta_frac * g.max_detour
    gain = driver_gain(env.scores[rider], detour_km, g.max_detour, cfg.economy)
    scale = g.max_detour if cfg.normalize_reward else 1.0
    return reward_value(env.direct[rider], detour_km, gain, cfg.alpha_r, theta, scale)


# -- policy networks -------------------------------------------------------------


@dataclass
class TrainConfig:
    actor_lr: float = 0.001
    critic_lr: float = 0.01
    gamma: float = 0.95
    tau: float = 0.01
    batch_size: int = 32
    buffer_capacity: int = 20000
    priority_exponent: float = 0.6
    is_exponent: float = 0.4
    explore_start: float = 0.5
    explore_end: float = 0.05
    explore_episodes: int = 40
    episodes: int = 60
    updates_per_day: int = 8
    hidden_actor: tuple = (64, 64)
    hidden_critic: tuple = (128, 64)
    max_grad_norm: float = 10.0

    def __post_init__(self):
        if not (self.actor_lr > 0 and self.critic_lr > 0):
            raise InputError("marl learning rates must be positive")
        if not (0 < self.gamma <= 1 and 0 < self.tau <= 1):
            raise InputError("marl.gamma and marl.tau must lie in (0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise InputError("marl.buffer_capacity must be >= marl.batch_size >= 1")

    def explore_rate(self, episode):
        if self.explore_episodes <= 0:
            return self.explore_end
        frac = min(episode / self.explore_episodes, 1.0)
        return self.explore_start + frac * (self.explore_end - self.explore_start)


def critic_input_dim(n_agents, n_actions):
    return n_agents * (OBS_DIM + n_actions)


def make_actor(n_slots, hidden=(64, 64), rng=None):
    return NeuralNet((OBS_DIM,) + tuple(hidden) + (n_slots + 1,), "tanh", rng)


def make_critic(n_agents, n_slots, hidden=(128, 64), rng=None):
    return NeuralNet((critic_input_dim(n_agents, n_slots + 1),) + tuple(hidden) + (1,), "tanh", rng)


def policy_probs(actor, obs, mask):
    return masked_softmax(actor.forward(obs), mask)


def select_action(actor, obs, mask, explore_rate, rng):
    """Sample from the masked policy; uniform over legal actions w.p. ``explore_rate``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ContractViolation("action mask has no legal entry")
    legal = np.flatnonzero(mask)
    if legal.size == 1:
        return int(legal[0])
    if explore_rate > 0 and rng.random() < explore_rate:
        return int(legal[rng.integers(legal.size)])
    probs = policy_probs(actor, obs, mask)
    return int(min(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"), probs.size - 1))


def greedy_action(actor, obs, mask):
    probs = policy_probs(actor, obs, mask)
    return int(np.argmax(probs))


def _order(m, i):
    return np.concatenate(([i], np.arange(i), np.arange(i + 1, m)))


def joint_blocks(obs, acts, n_actions):
    """Per-agent ``[observation, one-hot action]`` blocks, shape (M, 28+A)."""
    m = obs.shape[0]
    onehot = np.zeros((m, n_actions))
    valid = acts >= 0
    onehot[np.flatnonzero(valid), acts[valid]] = 1.0
    return np.concatenate([obs, onehot], axis=1)


def joint_critic_rows(obs, acts, rows, n_actions):
    """Critic inputs for each agent row: its own block first, others in order.

    ``obs`` is (M, 28); ``acts`` is (M,) integer actions (``-1`` for padded
    slots, encoded as all-zero one-hot). Returns (len(rows), M*(28+A)).
    """
    block = joint_blocks(obs, acts, n_actions)
    m = block.shape[0]
    perms = np.array([_order(m, i) for i in rows], dtype=int).reshape(len(rows), m)
    return block[perms].reshape(len(rows), -1)


def critic_first_layer(critic, obs, acts, n_actions):
    """First-layer pre-activations of every agent row, without building inputs.

    Row ``i`` equals ``joint_critic_rows(obs, acts, [i]) @ W0 + b0``: agent
    ``i`` sits at position 0, agents ``j < i`` at ``j + 1`` and ``j > i`` at
    ``j``, so the sum splits into prefix and suffix sums of per-agent terms.
    """
    m = obs.shape[0]
    blk = OBS_DIM + n_actions
    W = critic.params[0].reshape(m, blk, -1)
    b = critic.params[1]

    def contrib(agents, positions):
        out = np.einsum("jd,jdh->jh", obs[agents], W[positions, :OBS_DIM])
        a = acts[agents]
        ok = a >= 0
        out[ok] += W[positions[ok], OBS_DIM + a[ok]]
        return out

    idx = np.arange(m)
    same = contrib(idx, idx)
    own = obs @ W[0, :OBS_DIM]
    ok = acts >= 0
    own[ok] += W[0, OBS_DIM + acts[ok]]
    shift = np.zeros_like(same)
    if m > 1:
        shift[:-1] = contrib(idx[:-1], idx[1:])
    prefix = np.zeros_like(same)
    prefix[1:] = np.cumsum(shift[:-1], axis=0)
    suffix = np.zeros_like(same)
    suffix[:-1] = np.cumsum(same[::-1], axis=0)[::-1][1:]
    return own + prefix + suffix + b


def critic_own_action_variants(critic, z_row, own_act, actions, n_actions):
    """First-layer rows for one agent with its own action swapped to each of ``actions``."""
    W0 = critic.params[0]
    base = z_row.copy()
    if own_act >= 0:
        base -= W0[OBS_DIM + own_act]
    return base[None, :] + W0[OBS_DIM + np.asarray(actions, dtype=int)]


def critic_head(critic, z1):
    """Finish a critic forward pass from first-layer pre-activations."""
    a = np.tanh(z1) if critic.activation == "tanh" else (np.maximum(z1, 0.0) if critic.activation == "relu" else z1)
    if critic.n_layers == 1:
        return z1.reshape(-1)
    tail = critic.params[2:]
    for k in range(0, len(tail), 2):
        z = a @ tail[k] + tail[k + 1]
        last = k == len(tail) - 2
        a = z if last else (np.tanh(z) if critic.activation == "tanh" else (np.maximum(z, 0.0) if critic.activation == "relu" else z))
    return a.reshape(-1)


# -- losses and analytic gradients -----------------------------------------------


def critic_loss_and_grads(critic, x, y, weights=None):
    """Weighted mean squared error of ``critic(x)`` against targets ``y``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    q, cache = critic.forward(x, keep=True)
    q = q.reshape(-1)
    td = q - y
    loss = float(np.sum(w * td * td) / len(y))
    check_finite(loss, "critic loss")
    grad_q = (2.0 * w * td / len(y))[:, None]
    grads = critic.backward(cache, grad_q)
    return loss, grads, td


def actor_loss_and_grads(actor, obs, masks, qvals, weights=None):
    """Loss ``-mean_k sum_a pi(a|o_k) Q_k(a)`` with Q held fixed.

    ``qvals`` has the same shape as ``masks``; masked entries are ignored.
    """
    obs = np.atleast_2d(obs)
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    qvals = np.where(masks, np.atleast_2d(qvals), 0.0)
    w = np.ones(obs.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    logits, cache = actor.forward(obs, keep=True)
    p = masked_softmax(logits, masks)
    expected = np.sum(p * qvals, axis=1)
    loss = float(-np.sum(w * expected) / obs.shape[0])
    check_finite(loss, "actor loss")
    # d(sum_a p_a q_a)/d logit_b = p_b (q_b - expected)
    g_logits = -(w[:, None] * p * (qvals - expected[:, None])) / obs.shape[0]
    grads = actor.backward(cache, g_logits)
    return loss, grads


def net_gradients(net, loss_spec, batch):
    """Dispatch to the analytic gradient of the named loss.

    ``loss_spec`` is ``"critic"`` (batch keys ``x``, ``y``, optional
    ``weights``) or ``"actor"`` (keys ``obs``, ``masks``, ``q``, optional
    ``weights``). Returns ``(loss, grads)``.
    """
    if loss_spec == "critic":
        if len(batch["y"]) == 0:
            raise InputError("empty batch")
        loss, grads, _ = critic_loss_and_grads(net, batch["x"], batch["y"], batch.get("weights"))
        return loss, grads
    if loss_spec == "actor":
        if len(batch["obs"]) == 0:
            raise InputError("empty batch")
        return actor_loss_and_grads(net, batch["obs"], batch["masks"], batch["q"], batch.get("weights"))
    raise InputError(f"unknown loss {loss_spec!r}")


# -- bundle and training ---------------------------------------------------------


@dataclass
class Transition:
    """Joint experience of one decision tick (rows padded to ``n_agents``)."""

    obs: np.ndarray
    acts: np.ndarray
    masks: np.ndarray
    rewards: np.ndarray
    deciders: np.ndarray
    next_obs: np.ndarray
    next_masks: np.ndarray
    next_deciders: np.ndarray
    done: bool


@dataclass
class PolicyBundle:
    actor: NeuralNet
    critic: NeuralNet
    target_actor: NeuralNet
    target_critic: NeuralNet
    n_agents: int
    n_slots: int
    cfg: TrainConfig = field(default_factory=TrainConfig)
    actor_opt: Adam = None
    critic_opt: Adam = None

    def __post_init__(self):
        if self.actor_opt is None:
            self.actor_opt = Adam(self.actor, self.cfg.actor_lr, max_norm=self.cfg.max_grad_norm)
        if self.critic_opt is None:
            self.critic_opt = Adam(self.critic, self.cfg.critic_lr, max_norm=self.cfg.max_grad_norm)

    @classmethod
    def create(cls, n_agents, n_slots, cfg: TrainConfig = None, rng=None):
        cfg = cfg or TrainConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        actor = make_actor(n_slots, cfg.hidden_actor, rng)
        critic = make_critic(n_agents, n_slots, cfg.hidden_critic, rng)
        return cls(actor, critic, actor.copy(), critic.copy(), n_agents, n_slots, cfg)

    @property
    def n_actions(self):
        return self.n_slots + 1

    def nets(self):
        return {"actor": self.actor, "critic": self.critic, "target_actor": self.target_actor, "target_critic": self.target_critic}


def _variant_rows(critic, obs, acts, agents, masks, n_actions):
    """First-layer rows for each agent in ``agents`` over its legal actions."""
    z = critic_first_layer(critic, obs, acts, n_actions)
    rows, spans = [], []
    for i in agents:
        legal = np.flatnonzero(masks[i])
        start = sum(len(r) for r in rows)
        rows.append(critic_own_action_variants(critic, z[i], acts[i], legal, n_actions))
        spans.append((start, legal))
    return rows, spans


def _target_values(bundle: PolicyBundle, batch):
    """Expected target-critic value at each transition's next state.

    The scored agent's action is averaged under the target policy; other
    agents take the target policy's most likely legal action. Returns one
    dict ``{agent_row: value}`` per transition.
    """
    A = bundle.n_actions
    rows, meta = [], []
    for t, tr in enumerate(batch):
        if tr.done or len(tr.next_deciders) == 0:
            continue
        nd = np.asarray(tr.next_deciders, dtype=int)
        probs = masked_softmax(bundle.target_actor.forward(tr.next_obs[nd]), tr.next_masks[nd])
        base = np.full(bundle.n_agents, -1)
        base[nd] = np.argmax(probs, axis=1)
        pos = {int(j): k for k, j in enumerate(nd)}
        want = [int(i) for i in tr.deciders if int(i) in pos]
        if not want:
            continue
        r, spans = _variant_rows(bundle.target_critic, tr.next_obs, base, want, tr.next_masks, A)
        offset = sum(len(x) for x in rows)
        rows.extend(r)
        for i, (start, legal) in zip(want, spans):
            meta.append((t, i, offset + start, legal, probs[pos[i]][legal]))
    out = [dict() for _ in batch]
    if not rows:
        return out
    q = critic_head(bundle.target_critic, np.concatenate(rows))
    for t, i, start, legal, p in meta:
        out[t][i] = float(np.dot(p, q[start : start + len(legal)]))
    return out


def train_step(bundle: PolicyBundle, batch, weights=None, cfg: TrainConfig = None):
    """One critic step, one actor step, then soft target updates.

    ``batch`` is a list of :class:`Transition`. Returns ``(critic_loss,
    actor_loss, per-transition |td|)``. On a non-finite parameter the step is
    rolled back and :class:`NumericError` raised.
    """
    cfg = cfg or bundle.cfg
    A = bundle.n_actions
    if not batch:
        raise InputError("empty batch")
    w_tr = np.ones(len(batch)) if weights is None else np.asarray(weights, dtype=float)
    nxt = _target_values(bundle, batch)
    xs, ys, ws, owner = [], [], [], []
    for t, tr in enumerate(batch):
        rows = [int(i) for i in tr.deciders]
        if not rows:
            continue
        xs.append(joint_critic_rows(tr.obs, tr.acts, rows, A))
        for i in rows:
            ys.append(tr.rewards[i] + (0.0 if tr.done else cfg.gamma * nxt[t].get(i, 0.0)))
            ws.append(w_tr[t])
            owner.append(t)
    if not ys:
        return 0.0, 0.0, np.zeros(len(batch))
    x = np.concatenate(xs)
    backup = [p.copy() for p in bundle.actor.params], [p.copy() for p in bundle.critic.params]
    c_loss, c_grads, td = critic_loss_and_grads(bundle.critic, x, np.array(ys), np.array(ws))
    bundle.critic_opt.step(bundle.critic, c_grads)

    # actor: critic value of each decider's legal actions, other agents fixed
    rows, meta = [], []
    for t, tr in enumerate(batch):
        dec = [int(i) for i in tr.deciders]
        if not dec:
            continue
        r, spans = _variant_rows(bundle.critic, tr.obs, tr.acts, dec, tr.masks, A)
        offset = sum(len(x) for x in rows)
        rows.extend(r)
        for i, (start, legal) in zip(dec, spans):
            meta.append((t, i, offset + start, legal))
    qall = critic_head(bundle.critic, np.concatenate(rows))
    a_obs, a_masks, a_q, a_w = [], [], [], []
    for t, i, start, legal in meta:
        q = np.zeros(A)
        q[legal] = qall[start : start + len(legal)]
        a_obs.append(batch[t].obs[i])
        a_masks.append(batch[t].masks[i])
        a_q.append(q)
        a_w.append(w_tr[t])
    a_loss, a_grads = actor_loss_and_grads(bundle.actor, np.array(a_obs), np.array(a_masks), np.array(a_q), np.array(a_w))
    bundle.actor_opt.step(bundle.actor, a_grads)
    if not (bundle.actor.all_finite() and bundle.critic.all_finite()):
        bundle.actor.params, bundle.critic.params = backup
        raise NumericError("non-finite parameters after update; step rolled back")
    bundle.target_actor.soft_update_from(bundle.actor, cfg.tau)
    bundle.target_critic.soft_update_from(bundle.critic, cfg.tau)
    per_tr = np.zeros(len(batch))
    for t, e in zip(owner, np.abs(td)):
        per_tr[t] = max(per_tr[t], e)
    return c_loss, a_loss, per_tr


def make_replay(cfg: TrainConfig):
    return PrioritizedReplay(cfg.buffer_capacity, cfg.priority_exponent, cfg.is_exponent)


def soft_update(target: NeuralNet, online: NeuralNet, tau):
    if not 0 <= tau <= 1:
        raise InputError("tau must lie in [0, 1]")
    target.soft_update_from(online, tau)
    return target


def explore_schedule(cfg: TrainConfig, episode):
    rate = cfg.explore_rate(episode)
    if not 0 <= rate <= 1 or math.isnan(rate):
        raise InputError("exploration rate outside [0, 1]")
    return rate


# -- acting inside a day ---------------------------------------------------------


def bind_slots(riders, direct_km, n_slots):
    """Map rider ids to action slots, longest direct trip first (ties by id).

    Riders beyond ``n_slots`` get no slot and cannot be chosen.
    """
    order = sorted(riders, key=lambda r: (-direct_km[r], r))
    return {r: k for k, r in enumerate(order[:n_slots])}


class MaddpgMatcher:
    """Drives a :class:`~arsim.env.DayEnv` with the shared actor.

    With ``learn`` set, every decision tick becomes a :class:`Transition`
    pushed into ``replay`` once the next decision tick (or day end) is known.
    """

    name = "maddpg"

    def __init__(self, bundle: PolicyBundle, rng, explore=0.0, greedy=True, replay=None):
        self.bundle = bundle
        self.rng = rng
        self.explore = explore
        self.greedy = greedy
        self.replay = replay
        self.pending = None

    @property
    def learning(self):
        return self.replay is not None

    def begin_day(self, env):
        env.slot_of = bind_slots(env.rider_ids, env.direct, self.bundle.n_slots)
        env.slot_rider = {k: r for r, k in env.slot_of.items()}
        self.rows = {d: k for k, d in enumerate(env.driver_ids[: self.bundle.n_agents])}
        self.pending = None

    def _joint_state(self, env):
        m, A = self.bundle.n_agents, self.bundle.n_actions
        obs = np.zeros((m, OBS_DIM))
        masks = np.zeros((m, A), dtype=bool)
        masks[:, -1] = True
        deciders = []
        for d, k in self.rows.items():
            obs[k] = env_observation(env, d)
            if env.can_decide(d):
                masks[k] = action_mask(env, d, self.bundle.n_slots)
                if masks[k].sum() > 1:
                    deciders.append(k)
        return obs, masks, np.array(deciders, dtype=int)

    def act(self, env):
        obs, masks, deciders = self._joint_state(env)
        if self.pending is not None and len(deciders):
            self._finish(obs, masks, deciders, False)
        if not len(deciders):
            return
        acts = np.full(self.bundle.n_agents, -1)
        rewards = np.zeros(self.bundle.n_agents)
        decline = self.bundle.n_slots
        drivers = {k: d for d, k in self.rows.items()}
        if self.greedy and not self.learning:
            logits = self.bundle.actor.forward(obs[deciders])
            choice = np.argmax(masked_softmax(logits, masks[deciders]), axis=1)
        else:
            choice = [select_action(self.bundle.actor, obs[k], masks[k], self.explore, self.rng) for k in deciders]
        for k, a in zip(deciders, choice):
            a = int(a)
            d = drivers[k]
            if a != decline:
                r = env.slot_rider[a]
                if r in env.waiting:
                    rewards[k] = env.assign(d, r)
                else:
                    a = decline  # taken earlier this tick by a lower-id driver
            acts[k] = a
        if self.learning:
            self.pending = (obs, acts, masks, rewards, deciders)

    def _finish(self, next_obs, next_masks, next_deciders, done):
        obs, acts, masks, rewards, deciders = self.pending
        self.replay.push(Transition(obs, acts, masks, rewards, deciders, next_obs, next_masks, next_deciders, done))
        self.pending = None

    def end_day(self, env):
        if self.pending is not None:
            m, A = self.bundle.n_agents, self.bundle.n_actions
            self._finish(np.zeros((m, OBS_DIM)), np.ones((m, A), dtype=bool), np.zeros(0, dtype=int), True)


def train_from_replay(bundle: PolicyBundle, replay: PrioritizedReplay, rng, n_updates):
    """Run ``n_updates`` prioritized train steps; returns mean losses."""
    cfg = bundle.cfg
    if len(replay) < cfg.batch_size or n_updates <= 0:
        return None
    c_tot = a_tot = 0.0
    for _ in range(n_updates):
        idx, batch, weights = replay.sample(cfg.batch_size, rng)
        c, a, td = train_step(bundle, batch, weights)
        replay.update_priorities(idx, td)
        c_tot += c
        a_tot += a
    return c_tot / n_updates, a_tot / n_updates


def save_bundle(path, bundle: PolicyBundle, meta=None, actor_only=False):
    """Write the bundle's networks; ``actor_only`` keeps just what acting needs."""
    from .nets import save_checkpoint

    info = {"n_agents": bundle.n_agents, "n_slots": bundle.n_slots, "actor_only": bool(actor_only)}
    info.update(meta or {})
    nets = {"actor": bundle.actor} if actor_only else bundle.nets()
    save_checkpoint(path, nets, info)


def load_bundle(path, cfg: TrainConfig = None):
    """Rebuild a bundle; actor-only files get a fresh critic (fine for evaluation)."""
    from .nets import load_checkpoint

    cfg = cfg or TrainConfig()
    nets, meta = load_checkpoint(path)
    if "actor" not in nets:
        raise InputError("checkpoint lacks an actor network")
    n_agents, n_slots = int(meta["n_agents"]), int(meta["n_slots"])
    if nets["actor"].sizes[0] != OBS_DIM or nets["actor"].sizes[-1] != n_slots + 1:
        raise InputError(f"actor shape {nets['actor'].sizes} does not fit {n_slots} slots")
    if "critic" not in nets:
        critic = make_critic(n_agents, n_slots, cfg.hidden_critic, np.random.default_rng(0))
        nets["critic"] = critic
        nets["target_critic"] = critic.copy()
    nets.setdefault("target_actor", nets["actor"].copy())
    nets.setdefault("target_critic", nets["critic"].copy())
    b = PolicyBundle(nets["actor"], nets["critic"], nets["target_actor"], nets["target_critic"], n_agents, n_slots, cfg)
    return b, meta
