"""Proportional prioritized replay backed by a sum tree."""

from __future__ import annotations

import numpy as np

from ..errors import InputError, StateError


class SumTree:
    """Binary tree over ``capacity`` leaves holding nonnegative weights."""

    def __init__(self, capacity):
        size = 1
        while size < capacity:
            size *= 2
        self.size = size
        self.capacity = capacity
        self.tree = np.zeros(2 * size)

    def update(self, idx, value):
        i = idx + self.size
        self.tree[i] = value
        i //= 2
        while i >= 1:
            self.tree[i] = self.tree[2 * i] + self.tree[2 * i + 1]
            i //= 2

    def get(self, idx):
        return self.tree[idx + self.size]

    @property
    def total(self):
        return self.tree[1]

    def find(self, mass):
        """Leaf index whose cumulative weight interval contains ``mass``."""
        i = 1
        while i < self.size:
            left = self.tree[2 * i]
            if mass < left or self.tree[2 * i + 1] <= 0:
                i = 2 * i
            else:
                mass -= left
                i = 2 * i + 1
        return min(i - self.size, self.capacity - 1)


class PrioritizedReplay:
    """Ring buffer sampling entry ``i`` with probability ``p_i**exponent / sum``.

    New entries receive the largest priority seen so far, so each is likely
    to be replayed at least once before its priority is corrected.
    """

    def __init__(self, capacity, exponent=0.6, is_exponent=0.4, eps=1e-3):
        if capacity < 1:
            raise InputError("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self.exponent = float(exponent)
        self.is_exponent = float(is_exponent)
        self.eps = float(eps)
        self.tree = SumTree(self.capacity)
        self.data = [None] * self.capacity
        self.priorities = np.zeros(self.capacity)
        self.next = 0
        self.count = 0
        self.max_priority = 1.0

    def __len__(self):
        return self.count

    def push(self, entry, priority=None):
        p = self.max_priority if priority is None else float(priority)
        if not p > 0:
            raise InputError("priority must be positive")
        i = self.next
        self.data[i] = entry
        self.priorities[i] = p
        self.tree.update(i, p ** self.exponent)
        self.next = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)
        self.max_priority = max(self.max_priority, p)
        return i

    def probabilities(self):
        w = np.array([self.tree.get(i) for i in range(self.count)])
        return w / w.sum()

    def sample(self, batch_size, rng):
        """Return ``(indices, entries, weights)``; weights are scaled to max 1."""
        if self.count < batch_size or batch_size < 1:
            raise StateError(f"buffer holds {self.count} entries, need {batch_size}")
        total = self.tree.total
        idx = np.array([self.tree.find(rng.random() * total) for _ in range(batch_size)])
        probs = np.array([self.tree.get(i) for i in idx]) / total
        weights = (self.count * probs) ** (-self.is_exponent)
        weights /= weights.max()
        return idx, [self.data[i] for i in idx], weights

    def update_priorities(self, idx, td_errors):
        for i, td in zip(idx, np.abs(np.asarray(td_errors, dtype=float))):
            p = float(td) + self.eps
            self.priorities[i] = p
            self.tree.update(int(i), p ** self.exponent)
            self.max_priority = max(self.max_priority, p)
