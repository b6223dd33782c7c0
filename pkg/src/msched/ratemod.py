"""SINR, Shannon rates and the proportional-fairness objective."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .chanmod import BeamAssignment, ChannelRealization

DEFAULT_FORGETTING = 0.1
DEFAULT_GUARD = 1e-6


def policy_bits(index: int, num_users: int) -> np.ndarray:
    """Scheduling vector of a basis index; user 0 is the most significant bit."""
    if not 0 <= index < 1 << num_users:
        raise ValueError(f"index {index} out of range for T={num_users}")
    shifts = np.arange(num_users - 1, -1, -1)
    return ((index >> shifts) & 1).astype(np.int8)


def policy_index(theta) -> int:
    out = 0
    for b in np.asarray(theta).tolist():
        out = (out << 1) | int(b)
    return out


@lru_cache(maxsize=32)
def _policy_table(num_users: int) -> np.ndarray:
    idx = np.arange(1 << num_users)[:, None]
    shifts = np.arange(num_users - 1, -1, -1)[None, :]
    table = ((idx >> shifts) & 1).astype(np.float64)
    table.setflags(write=False)
    return table


def all_policies(num_users: int) -> np.ndarray:
    """(2^T, T) 0/1 float matrix; row i is policy_bits(i)."""
    return _policy_table(num_users)


def as_schedule(theta, num_users: int) -> np.ndarray:
    theta = np.asarray(theta)
    if theta.shape != (num_users,):
        raise ValueError(f"scheduling vector must have length {num_users}, got shape {theta.shape}")
    if not np.all((theta == 0) | (theta == 1)):
        raise ValueError("scheduling vector entries must be 0 or 1")
    return theta.astype(np.int8)


@dataclass(frozen=True)
class PFState:
    avg_rates: np.ndarray
    forgetting: float = DEFAULT_FORGETTING
    guard: float = DEFAULT_GUARD

    def __post_init__(self):
        rates = np.array(self.avg_rates, dtype=float)
        if rates.ndim != 1 or not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("avg_rates must be a finite nonnegative vector")
        if not 0.0 <= self.forgetting <= 1.0:
            raise ValueError("forgetting factor must lie in [0, 1]")
        if self.guard <= 0:
            raise ValueError("guard constant must be positive")
        rates.setflags(write=False)
        object.__setattr__(self, "avg_rates", rates)

    @classmethod
    def initial(cls, num_users: int, rate: float = 1.0, **kw) -> "PFState":
        return cls(np.full(num_users, float(rate)), **kw)

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / (self.avg_rates + self.guard)


@dataclass(frozen=True)
class RateReport:
    per_user_rates: np.ndarray
    sum_rate: float
    pf_value: float = 0.0


def gain_matrix(channel: ChannelRealization, beams: BeamAssignment) -> np.ndarray:
    """G[t, x] = P |n_t^H f_x|^2, the power user t receives from user x's beam."""
    proj = channel.matrix.conj().T @ beams.matrix
    return channel.config.user_power * np.abs(proj) ** 2


def user_sinr(channel: ChannelRealization, beams: BeamAssignment, theta, user: int) -> float:
    T = channel.config.num_users
    theta = as_schedule(theta, T)
    if theta[user] != 1:
        raise ValueError(f"user {user} is not scheduled")
    G = gain_matrix(channel, beams)
    interference = float(theta @ G[user] - G[user, user])
    return float(G[user, user] / (interference + channel.config.noise_var))


def candidate_rates(gain: np.ndarray, noise_var: float, thetas: np.ndarray) -> np.ndarray:
    """Per-user rates for a stack of scheduling vectors, shape (C, T)."""
    thetas = np.atleast_2d(thetas).astype(float)
    own = np.diag(gain)
    interference = thetas @ gain.T - thetas * own
    return thetas * np.log2(1.0 + own / (interference + noise_var))


def instantaneous_rates(channel: ChannelRealization, beams: BeamAssignment, theta) -> RateReport:
    theta = as_schedule(theta, channel.config.num_users)
    rates = candidate_rates(gain_matrix(channel, beams), channel.config.noise_var, theta)[0]
    return RateReport(per_user_rates=rates, sum_rate=float(rates.sum()))


def pf_objective(report: RateReport, pf: PFState, theta) -> float:
    theta = as_schedule(theta, len(pf.avg_rates))
    return float(np.sum(theta * report.per_user_rates * pf.weights))


def pf_update(pf: PFState, report: RateReport, theta) -> PFState:
    theta = as_schedule(theta, len(pf.avg_rates)).astype(bool)
    w = pf.forgetting
    blended = (1.0 - w) * pf.avg_rates + w * report.per_user_rates
    return replace(pf, avg_rates=np.where(theta, blended, pf.avg_rates))


def candidate_rewards(channel: ChannelRealization, beams: BeamAssignment, pf: PFState) -> np.ndarray:
    """PF objective of every one of the 2^T scheduling vectors, indexed by basis state."""
    thetas = all_policies(channel.config.num_users)
    rates = candidate_rates(gain_matrix(channel, beams), channel.config.noise_var, thetas)
    return rates @ pf.weights
