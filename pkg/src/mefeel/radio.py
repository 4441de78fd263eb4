"""Latency model of one training round: compute time plus Shannon-rate upload.

Infeasibility is expressed as ``math.inf`` (infinite latency or infinite
bandwidth demand) rather than an exception.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .nncore import ArchConfig

INFEASIBLE = math.inf


@dataclass(frozen=True)
class DeviceProfile:
    alpha: float  # seconds per work unit per sample
    dataset_size: int
    batch_size: int = 10
    tx_power: float = 1.0  # W
    noise_var: float = 1e-3  # W

    def __post_init__(self):
        if not (self.alpha > 0 and self.tx_power > 0 and self.noise_var > 0):
            raise ConfigurationError("alpha, tx_power and noise_var must be positive")
        if self.batch_size < 1 or self.dataset_size < 0:
            raise ConfigurationError("batch_size must be >= 1 and dataset_size >= 0")

    def snr(self, gain: float) -> float:
        return self.tx_power * gain / self.noise_var


@dataclass(frozen=True)
class ChannelRealization:
    gain: np.ndarray  # |h_k|^2 per device

    def __getitem__(self, k):
        return float(self.gain[k])

    def __len__(self):
        return len(self.gain)


@dataclass(frozen=True)
class CostModel:
    """Per-exit cost tables, index 0 holding exit 1.

    ``g1[m-1]``: work units to train one batch through exit m.
    ``g2[m-1]``: bits uploaded for the model truncated at exit m.
    """
    g1: tuple[float, ...]
    g2: tuple[float, ...]

    def __post_init__(self):
        g1 = tuple(float(v) for v in self.g1)
        g2 = tuple(float(v) for v in self.g2)
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "g2", g2)
        if len(g1) != len(g2) or not g1:
            raise ConfigurationError("g1 and g2 must be non-empty and equally long")
        for name, table in (("g1", g1), ("g2", g2)):
            if table[0] <= 0 or any(b <= a for a, b in zip(table, table[1:])):
                raise ConfigurationError(f"{name} must be positive and strictly increasing")

    @property
    def num_exits(self) -> int:
        return len(self.g1)

    @classmethod
    def from_arch(cls, arch: ArchConfig, bits_per_param: int = 32) -> "CostModel":
        """Analytic tables for a dense multi-exit network.

        g2 counts the parameters reachable from exits 1..m; g1 is the
        forward+backward multiply-accumulate count through exit m, normalised
        so that the full model costs one work unit.
        """
        truncs = [arch.truncated(m) for m in range(1, arch.num_exits + 1)]
        macs = [t.forward_macs() for t in truncs]
        g1 = tuple(c / macs[-1] for c in macs)
        g2 = tuple(float(bits_per_param * t.param_count()) for t in truncs)
        return cls(g1, g2)


def sample_channels(num_devices: int, seed: int, round_index: int) -> ChannelRealization:
    """I.i.d. unit-mean exponential gains, fixed within a round."""
    rng = np.random.default_rng([seed, round_index, 0xC4A7])
    gain = rng.exponential(1.0, size=num_devices)
    # exponential can return exactly 0.0 with negligible probability
    return ChannelRealization(np.maximum(gain, np.finfo(float).tiny))


def sample_alphas(num_devices: int, low: float, high: float, seed: int) -> np.ndarray:
    """Log-uniform compute coefficients in ``[low, high]``."""
    if not 0 < low <= high:
        raise ConfigurationError("need 0 < alpha_min <= alpha_max")
    rng = np.random.default_rng([seed, 0xA1FA])
    return np.exp(rng.uniform(math.log(low), math.log(high), size=num_devices))


def rate(bandwidth_hz: float, profile: DeviceProfile, gain: float) -> float:
    return bandwidth_hz * math.log2(1.0 + profile.snr(gain))


def _check_exit(cost: CostModel, m: int):
    if not 1 <= m <= cost.num_exits:
        raise ValueError(f"exit index must be in [1, {cost.num_exits}], got {m}")


def t_local(profile: DeviceProfile, cost: CostModel, m: int) -> float:
    _check_exit(cost, m)
    return profile.alpha * profile.dataset_size * cost.g1[m - 1] / profile.batch_size


def t_up(cost: CostModel, m: int, rate_bps: float) -> float:
    _check_exit(cost, m)
    if rate_bps <= 0:
        return INFEASIBLE
    return cost.g2[m - 1] / rate_bps


def latency(profile, cost, gain, m, bandwidth_hz) -> float:
    return t_local(profile, cost, m) + t_up(cost, m, rate(bandwidth_hz, profile, gain))


def required_bandwidth(profile: DeviceProfile, cost: CostModel, gain: float, m: int,
                       gamma_th: float) -> float:
    """Smallest bandwidth meeting the deadline at exit ``m``; inf if none does."""
    slack = gamma_th - t_local(profile, cost, m)
    if slack <= 0:
        return INFEASIBLE
    return cost.g2[m - 1] / (slack * math.log2(1.0 + profile.snr(gain)))
