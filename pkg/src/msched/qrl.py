"""Grover-inspired QRL training loop for downlink user scheduling.

Each training slot evaluates the PF reward of every candidate schedule,
marks those clearing the oracle threshold, amplifies them with Grover
iterations and samples a schedule from the amplified state. The sampled
schedule drives the PF history update. After each epoch the schedule with
the largest batch-averaged measurement probability is scored on held-out
validation slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math
from typing import Union

import numpy as np

from . import grover, qsim
from .chanmod import (BeamAssignment, ChannelConfig, ChannelRealization, generate_channel,
                      make_config, select_beams)
from .ratemod import (PFState, RateReport, all_policies, as_schedule, candidate_rates, gain_matrix,
                      instantaneous_rates, pf_objective, pf_update, policy_bits)

log = logging.getLogger(__name__)

VALIDATION_SLOT_OFFSET = 1 << 40
_TIE_TOL = 1e-12

IntOrAuto = Union[int, str]
FloatOrAdaptive = Union[float, str]


@dataclass(frozen=True)
class TrainConfig:
    channel: ChannelConfig = field(default_factory=make_config)
    learning_rate: float = 0.2
    batch_size: int = 8
    epochs: int = 500
    grover_iters: IntOrAuto = "auto"
    threshold: FloatOrAdaptive = "adaptive"
    q_start: float = 0.5
    q_end: float = 0.95
    validation_slots: int = 32
    forgetting: float = 0.1
    guard: float = 1e-6
    init_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.batch_size < 1 or self.epochs < 1 or self.validation_slots < 1:
            raise ValueError("batch_size, epochs and validation_slots must be positive")
        if self.grover_iters != "auto" and (not isinstance(self.grover_iters, int)
                                            or self.grover_iters < 1):
            raise ValueError("grover_iters must be a positive integer or 'auto'")
        if self.threshold != "adaptive" and not math.isfinite(float(self.threshold)):
            raise ValueError("threshold must be finite or 'adaptive'")
        for q in (self.q_start, self.q_end):
            if not 0.0 < q < 1.0:
                raise ValueError("threshold quantiles must lie in (0, 1)")
        if self.channel.num_users > qsim.MAX_QUBITS:
            raise ValueError(f"T={self.channel.num_users} exceeds the {qsim.MAX_QUBITS}-qubit cap")

    def quantile_at(self, epoch: int) -> float:
        """Linear ramp from q_start at the first epoch to q_end at the last."""
        if self.epochs == 1:
            return self.q_end
        frac = epoch / (self.epochs - 1)
        return self.q_start + (self.q_end - self.q_start) * frac

    def initial_pf(self) -> PFState:
        return PFState.initial(self.channel.num_users, self.init_rate,
                               forgetting=self.forgetting, guard=self.guard)


@dataclass(frozen=True)
class AgentParams:
    pf: PFState
    last_policy: tuple[int, ...]
    amplify_factor: int
    reward: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    tau_used: float
    marked_count: int
    measured_policy: tuple[int, ...]
    train_reward: float
    validation_reward: float
    validation_sum_rate: float
    validation_sum_rate_std: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    overshoot_count: int = 0
    empty_marked_slots: int = 0
    empty_epochs: int = 0
    measured: list[int] = field(default_factory=list)  # basis index sampled in every training slot

    def validation_rewards(self) -> np.ndarray:
        return np.array([r.validation_reward for r in self.records])


def evaluate_reward(channel: ChannelRealization, beams: BeamAssignment, theta,
                    pf: PFState) -> float:
    report = instantaneous_rates(channel, beams, theta)
    return pf_objective(report, pf, theta)


def marked_from_rewards(rewards: np.ndarray, tau: float) -> np.ndarray:
    """Indices with reward >= tau; the empty schedule (index 0) is never marked."""
    mask = rewards >= tau
    mask[0] = False
    return np.flatnonzero(mask)


def build_marked_set(channel: ChannelRealization, beams: BeamAssignment, pf: PFState,
                     tau: float) -> frozenset[int]:
    if math.isnan(tau):
        raise ValueError("threshold must not be NaN")
    T = channel.config.num_users
    rates = candidate_rates(gain_matrix(channel, beams), channel.config.noise_var, all_policies(T))
    return frozenset(marked_from_rewards(rates @ pf.weights, tau).tolist())


def adapt_threshold(rewards, q: float, eta: float, tau_prev: float | None) -> float:
    """Move tau a fraction eta toward the q-quantile (linear interpolation) of `rewards`."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    target = float(np.quantile(np.asarray(rewards, dtype=float), q))
    if tau_prev is None:
        return target
    return (1.0 - eta) * tau_prev + eta * target


def amplify_marked(marked: np.ndarray, num_qubits: int,
                   iterations: IntOrAuto = "auto") -> tuple[qsim.StateVector, int]:
    """Grover state for a marked index array; returns (state, iterations used)."""
    if marked.size == 0:
        return qsim.uniform_state(num_qubits), 0
    k_opt = grover.optimal_iterations(num_qubits, int(marked.size))
    k = k_opt if iterations == "auto" else int(iterations)
    return grover.amplify(qsim.oracle_signs(marked, num_qubits), k), k


def grover_schedule(channel: ChannelRealization, beams: BeamAssignment, pf: PFState,
                    rng: np.random.Generator, tau: float | None = None,
                    iterations: IntOrAuto = "auto", attempts: int = 1) -> tuple[np.ndarray, dict]:
    """Schedule one slot by amplitude amplification and measurement.

    `tau=None` pins the threshold to the slot's maximum reward, so the
    marked set is exactly the PF-optimal schedules. With `attempts > 1`
    the measured index is checked against the oracle and the circuit is
    re-prepared and measured again while the outcome is unmarked, up to
    `attempts` measurements in total.
    """
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    T = channel.config.num_users
    rates = candidate_rates(gain_matrix(channel, beams), channel.config.noise_var, all_policies(T))
    rewards = rates @ pf.weights
    if tau is None:
        tau = float(rewards.max())
    marked = marked_from_rewards(rewards, tau)
    sv, k = amplify_marked(marked, T, iterations)
    marked_lookup = set(marked.tolist())
    for used in range(1, attempts + 1):
        idx = qsim.measure_sample(sv, rng)
        if idx in marked_lookup or not marked_lookup:
            break
    info = {"index": idx, "marked": marked, "iterations": k, "tau": tau, "attempts": used,
            "probability": float(qsim.probabilities(sv)[idx]), "reward": float(rewards[idx]),
            "rates": rates[idx]}
    return policy_bits(idx, T), info


@lru_cache(maxsize=8)
def _validation_gains(channel: ChannelConfig, num_slots: int) -> np.ndarray:
    gains = []
    for v in range(num_slots):
        ch = generate_channel(channel, VALIDATION_SLOT_OFFSET + v)
        gains.append(gain_matrix(ch, select_beams(ch)))
    out = np.stack(gains)
    out.setflags(write=False)
    return out


def _validation_rates(theta: np.ndarray, gains: np.ndarray, noise_var: float) -> np.ndarray:
    """(V, T) per-slot rates of one fixed schedule over stacked gain matrices."""
    own = np.diagonal(gains, axis1=1, axis2=2)
    interference = gains @ theta - own * theta
    return theta * np.log2(1.0 + own / (interference + noise_var))


def validation_reward(theta, config: TrainConfig, pf: PFState) -> float:
    """Mean PF objective of a fixed schedule over the held-out validation slots."""
    theta = as_schedule(theta, config.channel.num_users).astype(float)
    gains = _validation_gains(config.channel, config.validation_slots)
    rates = _validation_rates(theta, gains, config.channel.noise_var)
    return float(np.mean(rates @ pf.weights))


def scale_free(pf: PFState, level: float) -> PFState:
    """Rescale the PF history so its weights 1/(S+a) average `level`; the argmax over schedules is unchanged."""
    target = pf.weights * (level / pf.weights.mean())
    return PFState(np.maximum(1.0 / target - pf.guard, 0.0), forgetting=pf.forgetting, guard=pf.guard)


def _epoch_policy(mean_probs: np.ndarray, mean_rewards: np.ndarray) -> int:
    top = mean_probs.max()
    ties = np.flatnonzero(mean_probs >= top - _TIE_TOL)
    return int(ties[np.argmax(mean_rewards[ties])])


def train(config: TrainConfig) -> tuple[AgentParams, TrainLog]:
    """Run the training loop; fully deterministic given `config`."""
    ch_cfg = config.channel
    T = ch_cfg.num_users
    table = all_policies(T)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x51]))
    pf = config.initial_pf()
    reference = config.initial_pf()
    adaptive = config.threshold == "adaptive"
    tau = 0.0 if adaptive else float(config.threshold)
    K = 1
    reward = 0.0
    last_idx = 0
    trace = TrainLog()
    val_cache: dict[int, np.ndarray] = {}
    preference = np.zeros(1 << T)
    reward_memory = np.zeros(1 << T)

    for epoch in range(config.epochs):
        q = config.quantile_at(epoch)
        prob_acc = np.zeros(1 << T)
        reward_acc = np.zeros(1 << T)
        batch_rewards = []
        marked_total = 0
        for b in range(config.batch_size):
            channel = generate_channel(ch_cfg, epoch * config.batch_size + b)
            gain = gain_matrix(channel, select_beams(channel))
            rates = candidate_rates(gain, ch_cfg.noise_var, table)
            rewards = rates @ pf.weights
            if adaptive:
                tau = adapt_threshold(rewards, q, config.learning_rate, tau)
            marked = marked_from_rewards(rewards, tau)
            marked_total += marked.size
            if marked.size == 0:
                trace.empty_marked_slots += 1
                sv, used = qsim.uniform_state(T), 0
            else:
                sv, used = amplify_marked(marked, T, config.grover_iters)
                K = used
                if used > grover.optimal_iterations(T, int(marked.size)):
                    trace.overshoot_count += 1
            probs = qsim.probabilities(sv)
            last_idx = qsim.measure_sample(sv, rng)
            trace.measured.append(last_idx)
            reward = float(rewards[last_idx])
            batch_rewards.append(reward)
            chosen = rates[last_idx]
            pf = pf_update(pf, RateReport(chosen, float(chosen.sum())), table[last_idx])
            prob_acc += probs
            reward_acc += rewards
        if marked_total == 0:
            trace.empty_epochs += 1
            log.info("epoch %d: no schedule cleared tau=%.6g; sampled from the uniform state", epoch, tau)

        eta = config.learning_rate
        preference = (1 - eta) * preference + eta * prob_acc / config.batch_size
        reward_memory = (1 - eta) * reward_memory + eta * reward_acc / config.batch_size
        policy = _epoch_policy(preference, reward_memory)
        if policy not in val_cache:
            gains = _validation_gains(ch_cfg, config.validation_slots)
            val_cache[policy] = _validation_rates(table[policy], gains, ch_cfg.noise_var)
        v_rates = val_cache[policy]
        v_sums = v_rates.sum(axis=1)
        judge = scale_free(pf, reference.weights.mean())
        v_reward = float(np.mean(v_rates @ judge.weights))
        trace.records.append(EpochRecord(
            epoch=epoch,
            tau_used=float(tau),
            marked_count=int(marked.size),
            measured_policy=tuple(int(x) for x in table[policy]),
            train_reward=float(np.mean(batch_rewards)),
            validation_reward=v_reward,
            validation_sum_rate=float(v_sums.mean()),
            validation_sum_rate_std=float(v_sums.std()),
        ))

    agent = AgentParams(pf=pf, last_policy=tuple(int(x) for x in table[last_idx]),
                        amplify_factor=K, reward=reward)
    return agent, trace
