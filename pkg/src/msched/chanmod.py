"""Correlated Rician downlink channels and DFT beam-domain beam selection."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np


def slot_rng(seed: int, slot: int, *stream: int) -> np.random.Generator:
    """Generator owned by one (seed, slot[, stream...]) coordinate."""
    return np.random.default_rng(np.random.SeedSequence([seed, slot, *stream]))


def _array_shape(num_antennas: int) -> tuple[int, int]:
    rows = int(math.isqrt(num_antennas))
    while num_antennas % rows:
        rows -= 1
    return rows, num_antennas // rows


@dataclass(frozen=True)
class ChannelConfig:
    num_antennas: int
    num_users: int
    array_rows: int
    array_cols: int
    rician_k: float
    corr_coeff: float
    noise_var: float
    total_power: float
    user_angles: tuple[float, ...]
    seed: int

    def __post_init__(self):
        if self.num_antennas < 1 or self.num_users < 1:
            raise ValueError("antenna and user counts must be positive")
        if self.num_users > self.num_antennas:
            raise ValueError(f"T={self.num_users} exceeds A={self.num_antennas}")
        if self.array_rows * self.array_cols != self.num_antennas:
            raise ValueError("array_rows * array_cols must equal num_antennas")
        if self.rician_k < 0:
            raise ValueError("rician_k must be nonnegative")
        if not 0.0 <= self.corr_coeff < 1.0:
            raise ValueError("corr_coeff must lie in [0, 1)")
        if self.noise_var <= 0 or self.total_power <= 0:
            raise ValueError("noise_var and total_power must be positive")
        if len(self.user_angles) != self.num_users:
            raise ValueError("need one LoS angle per user")
        if any(abs(a) >= math.pi / 2 for a in self.user_angles):
            raise ValueError("LoS angles must lie in (-pi/2, pi/2)")

    @property
    def user_power(self) -> float:
        """Per-user transmit power P_total / T (amplitude is its square root)."""
        return self.total_power / self.num_users

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.total_power / self.noise_var)


def make_config(num_antennas: int = 16, num_users: int = 6, snr_db: float = 20.0,
                rician_k: float = 3.0, corr_coeff: float = 0.5, total_power: float = 1.0,
                seed: int = 0, user_angles=None, array_shape=None) -> ChannelConfig:
    """Build a config from an SNR in dB; LoS angles default to U(-pi/3, pi/3) drawn from `seed`."""
    if user_angles is None:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA9_1E]))
        user_angles = rng.uniform(-math.pi / 3, math.pi / 3, size=num_users)
    rows, cols = array_shape or _array_shape(num_antennas)
    return ChannelConfig(
        num_antennas=num_antennas,
        num_users=num_users,
        array_rows=rows,
        array_cols=cols,
        rician_k=float(rician_k),
        corr_coeff=float(corr_coeff),
        noise_var=total_power * 10.0 ** (-snr_db / 10.0),
        total_power=float(total_power),
        user_angles=tuple(float(a) for a in user_angles),
        seed=int(seed),
    )


@dataclass(frozen=True)
class ChannelRealization:
    matrix: np.ndarray = field(repr=False)  # A x T, column t is user t
    config: ChannelConfig
    slot: int = 0


@dataclass(frozen=True)
class BeamAssignment:
    beam_index: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)  # A x T unit-norm DFT columns


def steering_vector(angle: float, num_antennas: int) -> np.ndarray:
    m = np.arange(num_antennas)
    return np.exp(1j * np.pi * m * np.sin(angle)) / np.sqrt(num_antennas)


def corr_matrix(num_antennas: int, rho: float) -> np.ndarray:
    """Exponential correlation model M[i, j] = rho**|i - j|."""
    idx = np.arange(num_antennas)
    return (float(rho) ** np.abs(idx[:, None] - idx[None, :])).astype(complex)


@lru_cache(maxsize=64)
def _corr_sqrt(num_antennas: int, rho: float) -> np.ndarray:
    w, v = np.linalg.eigh(corr_matrix(num_antennas, rho))
    if w.min() < -1e-10:
        raise ValueError(f"correlation matrix not PSD (min eigenvalue {w.min():.3e})")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    root.setflags(write=False)
    return root


@lru_cache(maxsize=16)
def _dft(num_antennas: int) -> np.ndarray:
    mk = np.outer(np.arange(num_antennas), np.arange(num_antennas))
    omega = np.exp(-2j * np.pi * mk / num_antennas) / np.sqrt(num_antennas)
    omega.setflags(write=False)
    return omega


def dft_matrix(num_antennas: int) -> np.ndarray:
    if num_antennas < 1:
        raise ValueError("dimension must be >= 1")
    return _dft(num_antennas).copy()


@lru_cache(maxsize=256)
def _los_matrix(angles: tuple[float, ...], num_antennas: int) -> np.ndarray:
    los = np.stack([steering_vector(a, num_antennas) for a in angles], axis=1)
    los.setflags(write=False)
    return los


def generate_channel(config: ChannelConfig, slot: int) -> ChannelRealization:
    """Draw the channel of one coherence slot; bit-identical for equal (config, slot)."""
    A, T, k = config.num_antennas, config.num_users, config.rician_k
    rng = slot_rng(config.seed, slot)
    g = (rng.standard_normal((A, T)) + 1j * rng.standard_normal((A, T))) / np.sqrt(2.0)
    nlos = _corr_sqrt(A, config.corr_coeff) @ g
    k_nlos = math.sqrt(1.0 / (k + 1.0))
    if k > 0:
        k_los = math.sqrt(k / (k + 1.0)) * math.sqrt(A)
        matrix = k_los * _los_matrix(config.user_angles, A) + k_nlos * nlos
    else:
        matrix = k_nlos * nlos
    return ChannelRealization(matrix=matrix, config=config, slot=slot)


def beam_energies(channel: ChannelRealization) -> np.ndarray:
    """T x A array; row t holds |Omega[:, j]^H n_t|^2 for every beam j."""
    proj = _dft(channel.config.num_antennas).conj().T @ channel.matrix
    return (np.abs(proj) ** 2).T


def beam_energy(channel: ChannelRealization, user: int) -> np.ndarray:
    return beam_energies(channel)[user]


def select_beams(channel: ChannelRealization) -> BeamAssignment:
    """Greedy distinct DFT beam per user, strongest users first.

    Users are ordered by their best beam energy (descending, ties to the
    lower user index); each takes its highest-energy beam still free, ties
    going to the lower beam index.
    """
    energy = beam_energies(channel)
    T, A = energy.shape
    order = sorted(range(T), key=lambda t: (-energy[t].max(), t))
    taken = np.zeros(A, dtype=bool)
    chosen = [0] * T
    for t in order:
        # stable sort keeps lower beam index first among equal energies
        for j in np.argsort(-energy[t], kind="stable"):
            if not taken[j]:
                chosen[t] = int(j)
                taken[j] = True
                break
    F = _dft(A)[:, chosen]
    return BeamAssignment(beam_index=tuple(chosen), matrix=F)
