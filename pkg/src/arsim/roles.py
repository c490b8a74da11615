"""Daily driver/rider assignment from altruism scores."""

from __future__ import annotations

from .errors import InputError

DRIVER = "driver"
RIDER = "rider"

LOW_SCORE = 0.2
EXPLORE_PROB = 0.1


def assign_roles(active, scores, rng, low_score=LOW_SCORE, explore_prob=EXPLORE_PROB):
    """Return ``{agent_id: role}`` for every active agent.

    Agents at or below ``low_score`` always drive. Others take a random role
    with probability ``explore_prob`` and otherwise ride with probability
    ``s / s_max``. Agents are visited in sorted-id order so the draws depend
    only on the set of ids, not on how it was passed in.
    """
    ids = sorted(active)
    if not ids:
        raise InputError("no active agents")
    s_max = max(scores[i] for i in ids)
    if s_max <= 0:
        s_max = 1.0
    roles = {}
    for i in ids:
        s = scores[i]
        if s <= low_score:
            roles[i] = DRIVER
            continue
        if rng.random() < explore_prob:
            roles[i] = RIDER if rng.random() < 0.5 else DRIVER
        else:
            roles[i] = RIDER if rng.random() < s / s_max else DRIVER
    return roles
