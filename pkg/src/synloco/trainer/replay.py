"""Uniform experience replay over a fixed-capacity ring."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Ring storage of (obs, action, reward, next_obs, done) transitions.

    Push overwrites the oldest entry once capacity is reached. Sampling is
    uniform with replacement from the buffer's own seeded generator, or from
    a one-shot seed when given.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        self._rng = np.random.default_rng(seed)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, obs, act, rew, next_obs, done):
        i = self._next
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, seed: int | None = None) -> dict:
        # with-replacement sampling needs no batch-size bound, only data
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        rng = self._rng if seed is None else np.random.default_rng(seed)
        idx = rng.integers(0, self._size, batch_size)
        return {
            "obs": self.obs[idx],
            "act": self.act[idx],
            "rew": self.rew[idx],
            "next_obs": self.next_obs[idx],
            "done": self.done[idx],
        }
