"""Fixed-capacity ring replay buffer over preallocated numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    cost: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray

    @property
    def size(self) -> int:
        return self.obs.shape[0]


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.action = np.zeros(capacity, dtype=np.float64)
        self.reward = np.zeros(capacity, dtype=np.float64)
        self.cost = np.zeros(capacity, dtype=np.float64)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.done = np.zeros(capacity, dtype=np.float64)
        self._ptr = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, obs, action, reward, cost, next_obs, done) -> None:
        i = self._ptr
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.cost[i] = cost
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self._ptr = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> Batch:
        """Uniform sample with replacement; older entries were overwritten."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(
            obs=self.obs[idx],
            action=self.action[idx],
            reward=self.reward[idx],
            cost=self.cost[idx],
            next_obs=self.next_obs[idx],
            done=self.done[idx],
        )
