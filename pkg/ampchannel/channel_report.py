"""
Binary-channel figures of merit and the per-experiment ChannelReport.

Bit "0" is the vacuum, bit "1" the signal state. Signal is the difference of
the photon-number expectations of the two bits, noise is the average of their
photon-number variances, and the noise figure is SNR_in / SNR_out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .infotheory import binary_mutual_information, optimal_threshold
from .states import MomentSet, PhotonDistribution


def to_db(value: float) -> float:
    """10·log10 for power-like ratios; inf stays inf, non-positive values give nan."""
    if math.isinf(value) and value > 0:
        return math.inf
    if not value > 0:
        return math.nan
    return 10.0 * math.log10(value)


def from_db(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class BinarySignalNoise:
    signal: float
    noise: float

    @property
    def snr(self) -> float:
        if self.noise > 0:
            return self.signal ** 2 / self.noise
        return math.inf if self.signal != 0 else math.nan


def binary_signal_noise(mean0: float, var0: float, mean1: float, var1: float) -> BinarySignalNoise:
    return BinarySignalNoise(signal=mean1 - mean0, noise=0.5 * (var0 + var1))


def input_signal_noise(signal_in: MomentSet) -> BinarySignalNoise:
    """Encoded states before the channel: vacuum against signal_in."""
    if signal_in.mean_photons <= 0:
        raise ValueError("noise figure needs a non-zero input signal")
    return binary_signal_noise(0.0, 0.0, signal_in.mean_photons, signal_in.photon_variance)


def noise_figure(snr_in: float, snr_out: float) -> float:
    """R = SNR_in/SNR_out; two noiseless ends count as an ideal channel."""
    if math.isinf(snr_in) and math.isinf(snr_out):
        return 1.0
    if snr_out == 0:
        return math.inf
    return snr_in / snr_out


@dataclass(frozen=True, eq=False)
class ChannelReport:
    amplifier: str
    gain_linear: float
    gain_db: float
    noise_figure_linear: float
    noise_figure_db: float
    ber: float
    mutual_information_bits: float
    threshold: int
    q01: float
    q10: float
    snr_in: float
    snr_out: float
    noise_out: float
    p0: PhotonDistribution
    p1: PhotonDistribution
    seed: Optional[int] = None
    wall_time: float = 0.0
    validity: Optional[Any] = None
    extras: Dict[str, Any] = field(default_factory=dict)
    flags: Tuple[str, ...] = ()

    @property
    def n_max(self) -> int:
        return self.p0.n_max


def pad_to(dist: PhotonDistribution, n_max: int) -> PhotonDistribution:
    """Extend a distribution with empty bins (never truncates)."""
    extra = n_max - dist.n_max
    if extra < 0:
        raise ValueError(f"cannot pad n_max={dist.n_max} down to {n_max}")
    if extra == 0:
        return dist
    errors = None if dist.errors is None else np.pad(dist.errors, (0, extra))
    return PhotonDistribution(probs=np.pad(dist.probs, (0, extra)), errors=errors, flags=dist.flags)


def assemble_report(amplifier: str, p0: PhotonDistribution, p1: PhotonDistribution,
                    signal_in: MomentSet, seed: Optional[int] = None, wall_time: float = 0.0,
                    validity: Optional[Any] = None, extras: Optional[Dict[str, Any]] = None,
                    flags: Tuple[str, ...] = ()) -> ChannelReport:
    """Threshold decision, gain, noise figure and mutual information from two output histograms."""
    n_max = max(p0.n_max, p1.n_max)
    p0, p1 = pad_to(p0, n_max), pad_to(p1, n_max)
    decision = optimal_threshold(p0, p1)

    before = input_signal_noise(signal_in)
    after = binary_signal_noise(p0.mean, p0.variance, p1.mean, p1.variance)
    gain = after.signal / before.signal
    figure = noise_figure(before.snr, after.snr)

    all_flags = tuple(dict.fromkeys(tuple(flags) + p0.flags + p1.flags))
    return ChannelReport(
        amplifier=amplifier,
        gain_linear=gain,
        gain_db=to_db(gain),
        noise_figure_linear=figure,
        noise_figure_db=to_db(figure),
        ber=decision.ber,
        mutual_information_bits=binary_mutual_information(decision.errors),
        threshold=decision.threshold,
        q01=decision.errors.q01,
        q10=decision.errors.q10,
        snr_in=before.snr,
        snr_out=after.snr,
        noise_out=after.noise,
        p0=p0,
        p1=p1,
        seed=seed,
        wall_time=wall_time,
        validity=validity,
        extras=dict(extras or {}),
        flags=all_flags,
    )
