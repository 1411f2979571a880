"""
Closed-form Gaussian propagators for constant-coefficient Fokker–Planck (2-D)
and Ornstein–Uhlenbeck (1-D) evolutions, plus the SDE-engine oracle check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .channel_report import BinarySignalNoise, noise_figure
from .logging_utils import log_function
from .states import gaussian_ensemble


class Dimensionality(str, Enum):
    QUADRATURE = "1d"
    AMPLITUDE = "2d"


@dataclass(frozen=True)
class GaussianState:
    """Gaussian quasi-probability.

    2-D: complex mean α₀ and total variance Δ² = ⟨|α − α₀|²⟩.
    1-D: real mean x₀ and variance d².
    """
    mean: Union[complex, float]
    variance: float
    dimensionality: Dimensionality = Dimensionality.AMPLITUDE
    ordering: float = 0.0

    def __post_init__(self):
        if isinstance(self.dimensionality, str):
            object.__setattr__(self, "dimensionality", Dimensionality(self.dimensionality))
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if self.dimensionality is Dimensionality.QUADRATURE:
            if isinstance(self.mean, complex) and self.mean.imag != 0:
                raise ValueError("a 1-D state needs a real mean")
            object.__setattr__(self, "mean", float(np.real(self.mean)))
        else:
            object.__setattr__(self, "mean", complex(self.mean))


@dataclass(frozen=True)
class LinearChannelParams:
    drift: float
    diffusion: float
    time: float

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"time must be non-negative, got {self.time}")


def _relaxation(Q: float, t: float) -> float:
    """(1 − e^{−2Qt})/(2Q), with the exact limit t at Q = 0."""
    if Q == 0:
        return t
    return -math.expm1(-2.0 * Q * t) / (2.0 * Q)


def fpe_propagate(g: GaussianState, p: LinearChannelParams) -> GaussianState:
    if g.dimensionality is not Dimensionality.AMPLITUDE:
        raise ValueError("fpe_propagate needs a 2-D state")
    decay = math.exp(-p.drift * p.time)
    variance = 2.0 * p.diffusion * _relaxation(p.drift, p.time) + g.variance * decay ** 2
    return GaussianState(g.mean * decay, variance, Dimensionality.AMPLITUDE, g.ordering)


def ou_propagate(g: GaussianState, p: LinearChannelParams) -> GaussianState:
    if g.dimensionality is not Dimensionality.QUADRATURE:
        raise ValueError("ou_propagate needs a 1-D state")
    decay = math.exp(-p.drift * p.time)
    variance = p.diffusion * _relaxation(p.drift, p.time) + g.variance * decay ** 2
    return GaussianState(g.mean * decay, variance, Dimensionality.QUADRATURE, g.ordering)


def gain_of(p: LinearChannelParams) -> float:
    """Amplitude gain e^{−Qt}; the photon-number gain is its square."""
    return math.exp(-p.drift * p.time)


def number_gain_of(p: LinearChannelParams) -> float:
    return gain_of(p) ** 2


def pia_fokker_planck(A: float, B: float, s: float, t: float) -> LinearChannelParams:
    """Q = B − A and 2D_s = A + B + s(A − B) for the amplifier master equation."""
    return LinearChannelParams(drift=B - A, diffusion=0.5 * (A + B + s * (A - B)), time=t)


def gaussian_noise_figure(state0: GaussianState, state1: GaussianState, p: LinearChannelParams) -> float:
    """Noise figure with S = |mean₁ − mean₀| and N = ½(var₀ + var₁), bit "0" on state0.

    Equals 1 for a noiseless (D = 0) channel.
    """
    def signal_noise(a: GaussianState, b: GaussianState) -> BinarySignalNoise:
        return BinarySignalNoise(signal=abs(b.mean - a.mean), noise=0.5 * (a.variance + b.variance))

    propagate = fpe_propagate if state0.dimensionality is Dimensionality.AMPLITUDE else ou_propagate
    before = signal_noise(state0, state1)
    after = signal_noise(propagate(state0, p), propagate(state1, p))
    return noise_figure(before.snr, after.snr)


# ── SDE oracle ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class OracleCheck:
    """Empirical against analytic moments of a constant-coefficient ensemble run."""
    analytic_mean: complex
    empirical_mean: complex
    mean_se: float
    analytic_variance: float
    empirical_variance: float
    variance_se: float
    analytic_x_variance: float
    empirical_x_variance: float
    x_variance_se: float
    halving_shift_se: Optional[float] = None

    @property
    def mean_z(self) -> float:
        return abs(self.empirical_mean - self.analytic_mean) / self.mean_se

    @property
    def variance_z(self) -> float:
        return abs(self.empirical_variance - self.analytic_variance) / self.variance_se

    @property
    def x_variance_z(self) -> float:
        return abs(self.empirical_x_variance - self.analytic_x_variance) / self.x_variance_se

    @property
    def mean_rel_error(self) -> float:
        scale = abs(self.analytic_mean)
        return abs(self.empirical_mean - self.analytic_mean) / scale if scale else math.nan

    @property
    def variance_rel_error(self) -> float:
        return abs(self.empirical_variance - self.analytic_variance) / self.analytic_variance


def _variance_se(values: np.ndarray) -> float:
    centered = values - values.mean()
    second = np.mean(centered ** 2)
    return math.sqrt(max(float(np.mean(centered ** 4) - second ** 2), 0.0) / values.size)


@log_function
def sde_oracle_check(p: LinearChannelParams, ensemble_size: int, seed: int,
                     initial: Optional[GaussianState] = None, dt: Optional[float] = None,
                     check_halving: bool = False, threads: int = 1) -> OracleCheck:
    """Run the Euler–Maruyama engine with Q_u ≡ Q, D_uu* ≡ D_s and compare moments.

    The initial 2-D state defaults to mean 1 and variance 1/2 in u units.
    """
    from .laser_fpe import ConstantCoefficientModel, evolve_ensemble, refine_step

    initial = initial or GaussianState(mean=1.0 + 0j, variance=0.5)
    # n_s = 1: u is the amplitude itself
    ensemble = gaussian_ensemble(initial.mean, initial.variance, 1.0, ensemble_size, seed, threads)
    model = ConstantCoefficientModel(Q=p.drift, D=p.diffusion)
    out = evolve_ensemble(ensemble, model, p.time, dt=dt, seed=seed, threads=threads)

    expected = fpe_propagate(initial, p)
    expected_x = ou_propagate(GaussianState(initial.mean.real, initial.variance / 2.0,
                                            Dimensionality.QUADRATURE), p)
    samples = out.samples
    centered = np.abs(samples - samples.mean()) ** 2
    x = samples.real

    shift = None
    if check_halving and p.time > 0:
        shift = max(refine_step(ensemble, model, p.time, dt=dt, seed=seed, threads=threads,
                                max_halvings=0).shifts_in_se)

    return OracleCheck(
        analytic_mean=expected.mean,
        empirical_mean=complex(samples.mean()),
        mean_se=math.sqrt(float(centered.mean()) / samples.size),
        analytic_variance=expected.variance,
        empirical_variance=float(centered.mean()),
        variance_se=float(np.std(centered) / math.sqrt(samples.size)),
        analytic_x_variance=expected_x.variance,
        empirical_x_variance=float(np.var(x)),
        x_variance_se=_variance_se(x),
        halving_shift_se=shift,
    )
