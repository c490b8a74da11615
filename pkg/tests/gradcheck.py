"""Central finite-difference oracle for the hand-written gradients."""

import numpy as np

from arsim.marl.maddpg import OBS_DIM, actor_loss_and_grads, critic_loss_and_grads
from arsim.marl.nets import NeuralNet

STEP = 1e-5
# entries whose analytic and numeric gradients are both below this are
# compared on absolute error instead (relative error is meaningless there)
FLOOR = 1e-6
ENTRIES_PER_ARRAY = 25


def numeric_grad(loss_fn, net, k, idx):
    p = net.params[k]
    old = p[idx]
    p[idx] = old + STEP
    up = loss_fn()
    p[idx] = old - STEP
    down = loss_fn()
    p[idx] = old
    return (up - down) / (2 * STEP)


def max_relative_error(loss_fn, net, grads, rng):
    worst = 0.0
    for k, g in enumerate(grads):
        flat = rng.choice(g.size, size=min(ENTRIES_PER_ARRAY, g.size), replace=False)
        for f in flat:
            idx = np.unravel_index(f, g.shape)
            num = numeric_grad(loss_fn, net, k, idx)
            ana = g[idx]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), FLOOR))
    return worst


def random_critic_case(rng):
    m = int(rng.integers(2, 5))
    n_actions = int(rng.integers(2, 8))
    hidden = tuple(int(h) for h in rng.integers(2, 65, size=int(rng.integers(1, 3))))
    net = NeuralNet((m * (OBS_DIM + n_actions),) + hidden + (1,), "tanh", rng)
    batch = int(rng.integers(1, 9))
    x = rng.normal(size=(batch, net.sizes[0]))
    y = rng.normal(size=batch)
    w = rng.random(batch) + 0.1
    _, grads, _ = critic_loss_and_grads(net, x, y, w)
    return net, grads, lambda: critic_loss_and_grads(net, x, y, w)[0]


def random_actor_case(rng):
    n_actions = int(rng.integers(2, 12))
    hidden = tuple(int(h) for h in rng.integers(2, 65, size=int(rng.integers(1, 3))))
    net = NeuralNet((OBS_DIM,) + hidden + (n_actions,), "tanh", rng)
    batch = int(rng.integers(1, 9))
    obs = rng.normal(size=(batch, OBS_DIM))
    masks = rng.random((batch, n_actions)) < 0.6
    masks[:, -1] = True
    q = rng.normal(size=(batch, n_actions))
    w = rng.random(batch) + 0.1
    _, grads = actor_loss_and_grads(net, obs, masks, q, w)
    return net, grads, lambda: actor_loss_and_grads(net, obs, masks, q, w)[0]


def gradient_errors(n_draws=50, seed=0):
    """Worst relative error per draw for critic and actor."""
    rng = np.random.default_rng(seed)
    crit, act = [], []
    for _ in range(n_draws):
        net, grads, fn = random_critic_case(rng)
        crit.append(max_relative_error(fn, net, grads, rng))
        net, grads, fn = random_actor_case(rng)
        act.append(max_relative_error(fn, net, grads, rng))
    return np.array(crit), np.array(act)
