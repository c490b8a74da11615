"""Independent random substreams derived from one run seed."""

from __future__ import annotations

import numpy as np

STREAMS = ("pool", "trips", "init", "roles", "population", "explore", "pso", "train")


def make_streams(seed):
    """One ``numpy.random.Generator`` per subsystem.

    Each stream is spawned from the same root so toggling one subsystem
    leaves every other subsystem's draws unchanged.
    """
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}
