"""
Phase-insensitive amplifier (PIA) and ideal photon-number amplifier (PNA) channels.

The PIA is parametrized by its photon-number gain G ≥ 1 and the thermal
occupancy n_b of its idler mode; a_out = √G a_in + √(G−1) b_in†.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from .channel_report import ChannelReport, assemble_report, input_signal_noise, noise_figure, to_db
from .states import (
    MomentSet,
    PhotonDistribution,
    _analytic,
    coherent_moments,
    coherent_number_dist,
    thermal_moments,
)
from .streams import StreamDomain, block_generator, map_blocks

logger = logging.getLogger(__name__)


class UnsupportedParameterError(ValueError):
    """The channel has no defined action for this parameter value."""


@dataclass(frozen=True)
class PiaParams:
    gain_n: float
    idler_photons: float

    def __post_init__(self):
        if not self.gain_n >= 1.0:
            raise ValueError(f"gain_n must be >= 1, got {self.gain_n}")
        if not self.idler_photons >= 0.0:
            raise ValueError(f"idler_photons must be >= 0, got {self.idler_photons}")

    @property
    def ideal(self) -> bool:
        return self.idler_photons == 0.0

    @property
    def thermal_photons(self) -> float:
        """Photons added to a vacuum input, (G − 1)(n_b + 1)."""
        return (self.gain_n - 1.0) * (self.idler_photons + 1.0)


@dataclass(frozen=True)
class MasterRates:
    """Gain rate A, loss rate B and Γ = 2|A − B| of the PIA master equation."""
    A: float
    B: float
    Gamma: float


def pia_master_rates(params: PiaParams, t: float) -> MasterRates:
    """Rates reproducing G = e^{Γt} and m̄ = B/(A − B) = n_b over time t."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    difference = math.log(params.gain_n) / (2.0 * t)
    return MasterRates(
        A=(params.idler_photons + 1.0) * difference,
        B=params.idler_photons * difference,
        Gamma=2.0 * difference,
    )


def _require_ideal(params: PiaParams):
    if not params.ideal:
        raise ValueError("this output formula assumes a vacuum idler; use pia_thermal_idler_output")


# ── Output distributions ─────────────────────────────────────────────

def pia_fock_output(m: int, params: PiaParams, n_max: int) -> PhotonDistribution:
    """P(n) = C(n, m)·(G−1)^{n−m}/G^{n+1} for n ≥ m."""
    _require_ideal(params)
    if m < 0:
        raise ValueError(f"m must be non-negative, got {m}")
    n = np.arange(n_max + 1)
    probs = np.zeros(n_max + 1)
    above = n >= m
    probs[above] = stats.nbinom.pmf(n[above] - m, m + 1, 1.0 / params.gain_n)
    return _analytic(probs, "pia fock output")


def _displaced_thermal(thermal: float, coherent: float, n_max: int) -> np.ndarray:
    """P(n) of a displaced thermal state via the Laguerre recurrence in log space.

    P(n) = m^n/(1+m)^{n+1}·e^{−x/(1+m)}·L_n(−x/(m(1+m))), m thermal and x coherent photons.
    """
    if thermal == 0.0:
        return stats.poisson.pmf(np.arange(n_max + 1), coherent)
    z = coherent / (thermal * (1.0 + thermal))
    log_laguerre = np.zeros(n_max + 1)
    ratio = 1.0 + z
    if n_max >= 1:
        log_laguerre[1] = math.log(ratio)
    for k in range(1, n_max):
        # (k+1)L_{k+1} = (2k+1+z)L_k − k·L_{k−1}, written for L_{k+1}/L_k
        ratio = ((2 * k + 1 + z) - k / ratio) / (k + 1)
        log_laguerre[k + 1] = log_laguerre[k] + math.log(ratio)
    n = np.arange(n_max + 1)
    log_p = (
        n * math.log(thermal / (1.0 + thermal))
        - math.log1p(thermal)
        - coherent / (1.0 + thermal)
        + log_laguerre
    )
    return np.exp(log_p)


def pia_thermal_idler_output(alpha_sq: float, params: PiaParams, n_max: int) -> PhotonDistribution:
    """Output for coherent input |α|² and thermal idler n_b: a displaced thermal state."""
    if alpha_sq < 0:
        raise ValueError(f"alpha_sq must be non-negative, got {alpha_sq}")
    probs = _displaced_thermal(params.thermal_photons, params.gain_n * alpha_sq, n_max)
    return _analytic(probs, "pia output")


def pia_coherent_output(alpha_sq: float, params: PiaParams, n_max: int) -> PhotonDistribution:
    """Σ_h (G−1)^h/G^{n+1}·n!/(h!((n−h)!)²)·e^{−|α|²}|α|^{2(n−h)}, evaluated in closed form."""
    _require_ideal(params)
    return pia_thermal_idler_output(alpha_sq, params, n_max)


def pia_mean_photons(n_in: float, params: PiaParams) -> float:
    return params.gain_n * n_in + params.thermal_photons


# ── Noise ────────────────────────────────────────────────────────────

def _check_moments(label: str, moments: MomentSet):
    if moments.photon_variance < 0 or moments.mean_photons < 0:
        raise ValueError(
            f"inconsistent {label} moments: mean {moments.mean_photons}, variance {moments.photon_variance}"
        )


def pia_output_variance(signal: MomentSet, params: PiaParams, idler: Optional[MomentSet] = None) -> float:
    """Photon-number variance of one amplified state (phase-averaged idler)."""
    idler = idler or thermal_moments(params.idler_photons)
    _check_moments("signal", signal)
    _check_moments("idler", idler)
    if idler.mean_amplitude != 0:
        raise ValueError("idler must have zero mean amplitude")
    G = params.gain_n
    n_a, n_b = signal.mean_photons, idler.mean_photons
    coherent = 2.0 * (signal.coherent_term * idler.coherent_term).real
    return (
        G ** 2 * signal.photon_variance
        + (G - 1.0) ** 2 * idler.photon_variance
        + G * (G - 1.0) * ((n_a + 1.0) * (n_b + 1.0) + n_a * n_b + coherent)
    )


@dataclass(frozen=True)
class NoiseBreakdown:
    """Seven contributions to the binary-channel output noise; total = ½·Σ terms.

    signal_shot, spontaneous, signal_spontaneous_beat, spontaneous_beat,
    signal_excess, idler_excess, coherent: amplified signal fluctuations,
    amplified spontaneous emission, their beat, the self-beat of spontaneous
    emission, excess noise of signal and idler, and phase-sensitive terms.
    """
    signal_shot: float
    spontaneous: float
    signal_spontaneous_beat: float
    spontaneous_beat: float
    signal_excess: float
    idler_excess: float
    coherent: float

    @property
    def terms(self) -> Tuple[float, ...]:
        return (self.signal_shot, self.spontaneous, self.signal_spontaneous_beat,
                self.spontaneous_beat, self.signal_excess, self.idler_excess, self.coherent)

    @property
    def total(self) -> float:
        return 0.5 * math.fsum(self.terms)


def pia_output_noise(signal: MomentSet, params: PiaParams, idler: Optional[MomentSet] = None) -> NoiseBreakdown:
    """Output noise ½(Var₀ + Var₁) with bit "0" on the vacuum, term by term.

    The phase-sensitive term carries the prefactor 2G(G−1) and vanishes for
    phase-averaged idlers.
    """
    idler = idler or thermal_moments(params.idler_photons)
    _check_moments("signal", signal)
    _check_moments("idler", idler)
    G = params.gain_n
    n_a, n_b = signal.mean_photons, idler.mean_photons
    return NoiseBreakdown(
        signal_shot=G * n_a,
        spontaneous=2.0 * (G - 1.0) * (n_b + 1.0),
        signal_spontaneous_beat=2.0 * G * (G - 1.0) * (n_b + 1.0) * n_a,
        spontaneous_beat=2.0 * (G - 1.0) ** 2 * (2.0 * n_b + 1.0),
        signal_excess=G ** 2 * (signal.photon_variance - n_a),
        idler_excess=2.0 * (G - 1.0) ** 2 * (idler.photon_variance - n_b),
        coherent=2.0 * G * (G - 1.0) * 2.0 * (signal.coherent_term * idler.coherent_term).real,
    )


@dataclass(frozen=True)
class NoiseFigure:
    linear: float
    db: float


def pia_noise_figure(signal_in: MomentSet, params: PiaParams, idler: Optional[MomentSet] = None) -> NoiseFigure:
    """SNR_in/SNR_out with vacuum as bit "0"; +inf for number-state inputs."""
    before = input_signal_noise(signal_in)
    signal_out = params.gain_n * signal_in.mean_photons
    noise_out = pia_output_noise(signal_in, params, idler).total
    snr_out = signal_out ** 2 / noise_out if noise_out > 0 else math.inf
    figure = noise_figure(before.snr, snr_out)
    return NoiseFigure(linear=figure, db=to_db(figure))


# ── Photon-number amplifier ──────────────────────────────────────────

def pna_output(dist: PhotonDistribution, gain_n, n_max: Optional[int] = None) -> PhotonDistribution:
    """Exact rescaling n → G·n of the photon-number spectrum.

    The result has G·n_max + 1 bins unless n_max is given.
    """
    if isinstance(gain_n, float) and gain_n.is_integer():
        gain_n = int(gain_n)
    if not isinstance(gain_n, (int, np.integer)) or isinstance(gain_n, bool):
        raise UnsupportedParameterError(f"PNA gain must be an integer, got {gain_n!r}")
    if gain_n < 1:
        raise UnsupportedParameterError(f"PNA gain must be positive, got {gain_n}")

    size = gain_n * dist.n_max + 1
    probs = np.zeros(size)
    probs[::gain_n] = dist.probs
    errors = None
    if dist.errors is not None:
        errors = np.zeros(size)
        errors[::gain_n] = dist.errors

    if n_max is not None:
        if n_max + 1 <= size:
            probs, errors = probs[: n_max + 1], None if errors is None else errors[: n_max + 1]
        else:
            probs = np.pad(probs, (0, n_max + 1 - size))
            errors = None if errors is None else np.pad(errors, (0, n_max + 1 - size))
    return PhotonDistribution(probs=probs, errors=errors, flags=dist.flags)


# ── Monte Carlo re-amplification ─────────────────────────────────────

def pia_resample_amplify(dist: PhotonDistribution, params: PiaParams, count: int, seed: int,
                         n_max: int, threads: int = 1) -> PhotonDistribution:
    """Sample m from dist and amplify each count through the Fock-input channel.

    The Fock-input output is m + NegBinomial(m + 1, 1/G).
    """
    _require_ideal(params)
    weights = dist.probs / dist.probs.sum()

    def block(index: int, start: int, stop: int) -> np.ndarray:
        rng = block_generator(seed, StreamDomain.RESAMPLING, index)
        m = rng.choice(weights.size, size=stop - start, p=weights)
        return m + rng.negative_binomial(m + 1, 1.0 / params.gain_n)

    parts = map_blocks(block, count, threads)
    outputs = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    clamped = int(np.count_nonzero(outputs > n_max))
    counts = np.bincount(np.clip(outputs, 0, n_max), minlength=n_max + 1)
    flags = (f"{clamped} resampled counts clamped at n_max={n_max}",) if clamped else ()
    return PhotonDistribution.from_counts(counts, count, flags)


# ── Binary channel ───────────────────────────────────────────────────

def pia_binary_report(alpha_sq: float, params: PiaParams, n_max: int) -> ChannelReport:
    """Vacuum against coherent |α|² through the PIA, decided at the optimal threshold."""
    p0 = pia_thermal_idler_output(0.0, params, n_max)
    p1 = pia_thermal_idler_output(alpha_sq, params, n_max)
    report = assemble_report(
        "pia", p0, p1, coherent_moments(math.sqrt(alpha_sq)),
        extras={"pia_gain_n": params.gain_n, "pia_idler_photons": params.idler_photons},
    )
    logger.debug(f"pia G={params.gain_n:.4g} n_b={params.idler_photons:.4g}: ber={report.ber:.4e}")
    return report


def pna_binary_report(alpha_sq: float, gain_n: int, n_max: int) -> ChannelReport:
    """Vacuum against coherent |α|² through the PNA."""
    p1 = pna_output(coherent_number_dist(alpha_sq, n_max), gain_n)
    p0 = PhotonDistribution(probs=np.eye(1, p1.n_max + 1)[0])
    return assemble_report("pna", p0, p1, coherent_moments(math.sqrt(alpha_sq)),
                           extras={"pna_gain_n": int(gain_n)})
