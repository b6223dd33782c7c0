"""Dense statevector simulator for the Grover gate set (H, X, Z, MCZ, phase oracle, diffusion).

Qubit 0 is the most significant bit of the basis index, so qubit i carries
scheduling bit i of a policy (see ``ratemod.policy_bits``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

MAX_QUBITS = 24
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        n = amps.size.bit_length() - 1
        if amps.ndim != 1 or amps.size != 1 << n or not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"need 2^N amplitudes with 1 <= N <= {MAX_QUBITS}, got {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)


class GateKind(str, Enum):
    H = "H"
    X = "X"
    Z = "Z"
    MCZ = "MCZ"
    PHASE_ORACLE = "PhaseOracle"
    DIFFUSION = "Diffusion"


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    targets: tuple[int, ...] = ()
    controls: tuple[int, ...] = ()
    marked: frozenset[int] = frozenset()


def _check_qubits(sv: StateVector, qubits) -> None:
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"qubit indices overlap: {qubits}")
    for q in qubits:
        if not 0 <= q < sv.num_qubits:
            raise IndexError(f"qubit {q} out of range for N={sv.num_qubits}")


def _index(n: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * n
    for q, v in fixed.items():
        idx[q] = v
    return tuple(idx)


def init_zero(num_qubits: int) -> StateVector:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros(1 << num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps)


def uniform_state(num_qubits: int) -> StateVector:
    """H^N |0...0>, written directly."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    dim = 1 << num_qubits
    return StateVector(np.full(dim, 1.0 / math.sqrt(dim), dtype=complex))


def apply_hadamard(sv: StateVector, qubit: int) -> StateVector:
    _check_qubits(sv, [qubit])
    n = sv.num_qubits
    psi = sv.tensor()
    a0, a1 = psi[_index(n, {qubit: 0})], psi[_index(n, {qubit: 1})]
    out = np.empty_like(psi)
    out[_index(n, {qubit: 0})] = (a0 + a1) * _INV_SQRT2
    out[_index(n, {qubit: 1})] = (a0 - a1) * _INV_SQRT2
    return StateVector(out.reshape(-1))


def apply_hadamard_all(sv: StateVector) -> StateVector:
    # H^N is the Walsh-Hadamard transform; butterfly along each axis
    n = sv.num_qubits
    psi = sv.amplitudes.copy()
    h = 1
    while h < psi.size:
        view = psi.reshape(-1, 2, h)
        a, b = view[:, 0, :].copy(), view[:, 1, :]
        view[:, 0, :] = a + b
        view[:, 1, :] = a - b
        h *= 2
    return StateVector(psi / math.sqrt(1 << n))


def apply_x(sv: StateVector, qubit: int) -> StateVector:
    _check_qubits(sv, [qubit])
    return StateVector(np.flip(sv.tensor(), axis=qubit).reshape(-1))


def apply_z(sv: StateVector, qubit: int) -> StateVector:
    _check_qubits(sv, [qubit])
    psi = sv.tensor().copy()
    psi[_index(sv.num_qubits, {qubit: 1})] *= -1
    return StateVector(psi.reshape(-1))


def apply_mcz(sv: StateVector, controls, target: int) -> StateVector:
    """Negate basis states whose control bits and target bit are all 1."""
    qubits = [*controls, target]
    _check_qubits(sv, qubits)
    psi = sv.tensor().copy()
    psi[_index(sv.num_qubits, {q: 1 for q in qubits})] *= -1
    return StateVector(psi.reshape(-1))


def _marked_array(marked, dim: int) -> np.ndarray:
    idx = np.fromiter((int(i) for i in marked), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= dim):
        raise ValueError(f"marked index outside [0, {dim})")
    return idx


def oracle_signs(marked, num_qubits: int) -> np.ndarray:
    """Diagonal of the phase oracle: -1 on marked basis states, +1 elsewhere."""
    dim = 1 << num_qubits
    signs = np.ones(dim)
    signs[_marked_array(marked, dim)] = -1.0
    return signs


def apply_phase_oracle(sv: StateVector, marked) -> StateVector:
    amps = sv.amplitudes.copy()
    amps[_marked_array(marked, amps.size)] *= -1
    return StateVector(amps)


def apply_diffusion(sv: StateVector) -> StateVector:
    """Inversion about the mean, (2|U><U| - I) sv."""
    amps = sv.amplitudes
    return StateVector(2.0 * amps.mean() - amps)


def oracle_from_pattern(pattern) -> list[GateOp]:
    """X-conjugated MCZ marking the single basis state spelled by `pattern`.

    `pattern` is a bit string or sequence, qubit 0 first.
    """
    bits = [int(b) for b in pattern]
    if not bits or any(b not in (0, 1) for b in bits):
        raise ValueError(f"pattern must be a non-empty bit sequence, got {pattern!r}")
    n = len(bits)
    flips = [GateOp(GateKind.X, targets=(q,)) for q, b in enumerate(bits) if b == 0]
    mcz = GateOp(GateKind.MCZ, targets=(n - 1,), controls=tuple(range(n - 1)))
    return [*flips, mcz, *flips]


def diffusion_gates(num_qubits: int) -> list[GateOp]:
    """H-X-MCZ-X-H decomposition; realizes the diffusion operator times a global phase of -1."""
    n = num_qubits
    hs = [GateOp(GateKind.H, targets=(q,)) for q in range(n)]
    xs = [GateOp(GateKind.X, targets=(q,)) for q in range(n)]
    mcz = GateOp(GateKind.MCZ, targets=(n - 1,), controls=tuple(range(n - 1)))
    return [*hs, *xs, mcz, *xs, *hs]


def apply_gate(sv: StateVector, op: GateOp) -> StateVector:
    kind = GateKind(op.kind)
    if kind is GateKind.H:
        for q in op.targets:
            sv = apply_hadamard(sv, q)
        return sv
    if kind is GateKind.X:
        for q in op.targets:
            sv = apply_x(sv, q)
        return sv
    if kind is GateKind.Z:
        for q in op.targets:
            sv = apply_z(sv, q)
        return sv
    if kind is GateKind.MCZ:
        (target,) = op.targets
        return apply_mcz(sv, op.controls, target)
    if kind is GateKind.PHASE_ORACLE:
        return apply_phase_oracle(sv, op.marked)
    return apply_diffusion(sv)


def run_circuit(sv: StateVector, ops) -> StateVector:
    for op in ops:
        sv = apply_gate(sv, op)
    return sv


def probabilities(sv: StateVector) -> np.ndarray:
    return np.abs(sv.amplitudes) ** 2


def measure_sample(sv: StateVector, rng: np.random.Generator) -> int:
    """Draw one basis index with probability |amp|^2; `sv` is left untouched."""
    cdf = np.cumsum(probabilities(sv))
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), cdf.size - 1))


def dump_amplitudes(sv: StateVector) -> str:
    """Text table: index, real, imaginary, probability, one row per basis state."""
    rows = ["index,real,imag,probability"]
    for i, a in enumerate(sv.amplitudes):
        rows.append(f"{i},{a.real:.17g},{a.imag:.17g},{abs(a) ** 2:.17g}")
    return "\n".join(rows) + "\n"
