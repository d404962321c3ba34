"""Counter-based random streams for reproducible, order-independent ensembles.

Each trajectory gets its own Philox stream keyed by (seed, trajectory index),
so ensemble results do not depend on scheduling and any single trajectory can
be replayed in isolation.
"""

from __future__ import annotations

import numpy as np


def trajectory_stream(seed: int, traj_index: int) -> np.random.Generator:
    """Independent generator for one trajectory of one ensemble."""
    if seed < 0 or traj_index < 0:
        raise ValueError("seed and trajectory index must be non-negative")
    key = np.array([seed, traj_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def block_uniforms(seed: int, traj_indices, n_steps: int, n_arrays: int = 1) -> np.ndarray:
    """Pre-draw uniforms for a block of trajectories.

    Returns an array of shape (n_arrays, len(traj_indices), n_steps).  Each
    trajectory's draws come from its own stream in a fixed order, so results
    are independent of how trajectories are grouped into blocks.
    """
    traj_indices = np.asarray(traj_indices, dtype=np.int64)
    out = np.empty((n_arrays, traj_indices.size, n_steps))
    for row, idx in enumerate(traj_indices):
        g = trajectory_stream(seed, int(idx))
        for a in range(n_arrays):
            out[a, row, :] = g.random(n_steps)
    return out


class KahanSum:
    """Compensated accumulator for arrays, used when summing across blocks."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self._comp = np.zeros(shape)

    def add(self, values) -> None:
        y = np.asarray(values) - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t
