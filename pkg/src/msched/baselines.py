"""Classical reference schedulers: exhaustive PF optimum, greedy PF and random."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .chanmod import BeamAssignment, ChannelRealization
from .ratemod import PFState, candidate_rates, candidate_rewards, gain_matrix, policy_bits

MAX_EXHAUSTIVE_USERS = 20


class BaselineKind(str, Enum):
    EXHAUSTIVE = "exhaustive"
    GREEDY_PF = "greedy"
    RANDOM = "random"


def exhaustive_best(channel: ChannelRealization, beams: BeamAssignment,
                    pf: PFState) -> tuple[np.ndarray, float]:
    """PF-optimal scheduling vector over all 2^T candidates (ties to the smallest index)."""
    T = channel.config.num_users
    if T > MAX_EXHAUSTIVE_USERS:
        raise ValueError(f"exhaustive search limited to T <= {MAX_EXHAUSTIVE_USERS}, got {T}")
    rewards = candidate_rewards(channel, beams, pf)
    best = int(np.argmax(rewards))
    return policy_bits(best, T), float(rewards[best])


def greedy_pf(channel: ChannelRealization, beams: BeamAssignment, pf: PFState) -> np.ndarray:
    """Add users one at a time while the PF objective strictly increases."""
    T = channel.config.num_users
    gain = gain_matrix(channel, beams)
    weights = pf.weights
    theta = np.zeros(T)
    value = 0.0
    while True:
        free = np.flatnonzero(theta == 0)
        if free.size == 0:
            break
        trial = np.repeat(theta[None, :], free.size, axis=0)
        trial[np.arange(free.size), free] = 1.0
        values = candidate_rates(gain, channel.config.noise_var, trial) @ weights
        i = int(np.argmax(values))
        if values[i] <= value:
            break
        theta, value = trial[i], float(values[i])
    return theta.astype(np.int8)


def random_policy(num_users: int, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli(1/2) bits conditioned on scheduling at least one user."""
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    theta = rng.integers(0, 2, size=num_users, dtype=np.int8)
    while not theta.any():
        theta = rng.integers(0, 2, size=num_users, dtype=np.int8)
    return theta
