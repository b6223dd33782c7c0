"""Grover iterations, closed-form success probability and iteration counts."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import qsim


@dataclass(frozen=True)
class GroverPlan:
    num_qubits: int
    marked: frozenset[int]
    iterations: int

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        object.__setattr__(self, "marked", frozenset(int(i) for i in self.marked))
        dim = 1 << self.num_qubits
        if any(not 0 <= i < dim for i in self.marked):
            raise ValueError(f"marked index outside [0, {dim})")


def amplify(signs: np.ndarray, iterations: int) -> qsim.StateVector:
    """Oracle+diffusion `iterations` times from the uniform state, given the oracle diagonal."""
    n = signs.size.bit_length() - 1
    amps = qsim.uniform_state(n).amplitudes
    for _ in range(iterations):
        amps = amps * signs
        amps = 2.0 * amps.mean() - amps
    return qsim.StateVector(amps)


def grover_search(plan: GroverPlan) -> qsim.StateVector:
    sv = qsim.apply_hadamard_all(qsim.init_zero(plan.num_qubits))
    for _ in range(plan.iterations):
        sv = qsim.apply_phase_oracle(sv, plan.marked)
        sv = qsim.apply_diffusion(sv)
    return sv


def success_probability(num_qubits: int, num_marked: int, iterations: int) -> float:
    dim = 1 << num_qubits
    if not 0 <= num_marked <= dim:
        raise ValueError(f"marked count must lie in [0, {dim}]")
    angle = math.asin(math.sqrt(num_marked / dim))
    return math.sin((2 * iterations + 1) * angle) ** 2


def optimal_iterations(num_qubits: int, num_marked: int) -> int:
    """floor(pi/4 sqrt(2^N / m)), at least 1 unless every state is marked (then 0)."""
    dim = 1 << num_qubits
    if num_marked == 0:
        raise ValueError("no marked states: nothing to amplify")
    if not 1 <= num_marked <= dim:
        raise ValueError(f"marked count must lie in [1, {dim}]")
    k = math.floor(math.pi / 4 * math.sqrt(dim / num_marked))
    return k if num_marked == dim else max(k, 1)
