"""
Photon-number distributions and s=0 (Wigner) phase-space ensembles.

Provides:
- PhotonDistribution: probabilities over n = 0..n_max with optional per-bin errors
- analytic constructors (coherent, thermal, Fock) and their MomentSets
- Wigner sampling of coherent and thermal states in the rescaled amplitude u = α/√n_s
- moment extraction, photon histograms and homodyne marginals from ensembles

Quadrature convention: a = x + iy with vacuum variance 1/4 per quadrature at s = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .streams import StreamDomain, block_generator, concatenate, map_blocks

logger = logging.getLogger(__name__)

TRUNCATION_WARN = 1e-6
NORMALIZATION_TOL = 1e-9
CLAMP_WARN_FRACTION = 0.01


# ── Photon-number distributions ──────────────────────────────────────

@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """P(n) for n = 0..n_max.

    errors holds one standard error per bin for Monte Carlo estimates and is
    None for analytic distributions. flags collects warnings raised while
    the distribution was built.
    """
    probs: np.ndarray
    errors: Optional[np.ndarray] = None
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty vector")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        if probs.sum() > 1.0 + NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r} > 1")
        object.__setattr__(self, "probs", probs)
        if self.errors is not None:
            errors = np.asarray(self.errors, dtype=float)
            if errors.shape != probs.shape:
                raise ValueError("errors must have one entry per bin")
            object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "flags", tuple(self.flags))

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.probs.size)

    @property
    def truncation_mass(self) -> float:
        return max(0.0, 1.0 - float(self.probs.sum()))

    @property
    def mean(self) -> float:
        return float(self.n @ self.probs)

    @property
    def variance(self) -> float:
        mean = self.mean
        return float(((self.n - mean) ** 2) @ self.probs)

    @property
    def fano(self) -> float:
        mean = self.mean
        return self.variance / mean if mean > 0 else float("nan")

    @classmethod
    def from_counts(cls, counts: np.ndarray, total: int, flags: Sequence[str] = ()) -> PhotonDistribution:
        """Histogram estimate with binomial standard errors."""
        probs = np.asarray(counts, dtype=float) / total
        errors = np.sqrt(probs * (1.0 - probs) / total)
        return cls(probs=probs, errors=errors, flags=tuple(flags))


def _analytic(probs: np.ndarray, label: str) -> PhotonDistribution:
    probs = np.clip(probs, 0.0, None)
    flags = []
    mass = 1.0 - probs.sum()
    if mass > TRUNCATION_WARN:
        message = f"{label}: truncation mass {mass:.3e} beyond n_max={probs.size - 1}"
        logger.warning(message)
        flags.append(message)
    return PhotonDistribution(probs=probs, flags=tuple(flags))


def default_n_max(mean: float, variance: float) -> int:
    """ceil(mean + 10·σ) of the most energetic state in an experiment."""
    return int(math.ceil(mean + 10.0 * math.sqrt(max(variance, 0.0))))


def coherent_number_dist(alpha_sq: float, n_max: int) -> PhotonDistribution:
    """Poisson distribution with mean |α|²."""
    if alpha_sq < 0:
        raise ValueError(f"alpha_sq must be non-negative, got {alpha_sq}")
    n = np.arange(n_max + 1)
    return _analytic(stats.poisson.pmf(n, alpha_sq), "coherent")


def thermal_number_dist(mean: float, n_max: int) -> PhotonDistribution:
    """Geometric distribution mean^n/(1+mean)^(n+1)."""
    if mean < 0:
        raise ValueError(f"mean must be non-negative, got {mean}")
    n = np.arange(n_max + 1)
    return _analytic(stats.nbinom.pmf(n, 1, 1.0 / (1.0 + mean)), "thermal")


def fock_number_dist(m: int, n_max: int) -> PhotonDistribution:
    if not 0 <= m <= n_max:
        raise ValueError(f"Fock number {m} outside 0..{n_max}")
    probs = np.zeros(n_max + 1)
    probs[m] = 1.0
    return PhotonDistribution(probs=probs)


def total_variation(p, q) -> float:
    """½ Σ|p − q| over the union of the two supports."""
    a = np.asarray(getattr(p, "probs", p), dtype=float)
    b = np.asarray(getattr(q, "probs", q), dtype=float)
    size = max(a.size, b.size)
    a = np.pad(a, (0, size - a.size))
    b = np.pad(b, (0, size - b.size))
    return 0.5 * float(np.abs(a - b).sum())


def total_variation_error(p: PhotonDistribution, q: PhotonDistribution) -> float:
    """½ Σ √(σ_p² + σ_q²): the per-bin combined errors summed like the distance itself.

    Bounds the distance expected between two estimates of one distribution.
    """
    size = max(p.probs.size, q.probs.size)
    variance = np.zeros(size)
    for dist in (p, q):
        if dist.errors is not None:
            variance[: dist.errors.size] += dist.errors ** 2
    return 0.5 * float(np.sqrt(variance).sum())


# ── Moments ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MomentSet:
    """First and second photon-number moments plus the coherent term ⟨a²⟩.

    Standard errors are set for Monte Carlo estimates only.
    """
    mean_amplitude: complex
    mean_photons: float
    photon_variance: float
    coherent_term: complex = 0j
    mean_photons_se: Optional[float] = None
    photon_variance_se: Optional[float] = None
    flags: Tuple[str, ...] = field(default=())

    @property
    def fano(self) -> float:
        if self.mean_photons > 0:
            return self.photon_variance / self.mean_photons
        return float("nan")


def coherent_moments(alpha: complex) -> MomentSet:
    alpha = complex(alpha)
    n = abs(alpha) ** 2
    return MomentSet(mean_amplitude=alpha, mean_photons=n, photon_variance=n,
                     coherent_term=alpha * alpha)


def thermal_moments(mean: float) -> MomentSet:
    return MomentSet(mean_amplitude=0j, mean_photons=float(mean),
                     photon_variance=float(mean) ** 2 + float(mean))


def fock_moments(m: int) -> MomentSet:
    return MomentSet(mean_amplitude=0j, mean_photons=float(m), photon_variance=0.0)


def moments_of(dist: PhotonDistribution) -> MomentSet:
    """Number moments of a phase-averaged distribution."""
    return MomentSet(mean_amplitude=0j, mean_photons=dist.mean, photon_variance=dist.variance)


# ── Phase-space ensembles ────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class PhaseSpaceEnsemble:
    """Samples of the rescaled amplitude u = α/√n_s drawn from W_s."""
    samples: np.ndarray
    n_s: float
    ordering: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("an ensemble needs at least one sample")
        if self.n_s <= 0:
            raise ValueError(f"n_s must be positive, got {self.n_s}")
        object.__setattr__(self, "samples", samples)

    @property
    def count(self) -> int:
        return self.samples.size

    @property
    def photons(self) -> np.ndarray:
        """Symmetric-ordered intensity n_s·|u|² per sample."""
        return self.n_s * np.abs(self.samples) ** 2

    def rotated(self, phi: float) -> PhaseSpaceEnsemble:
        return PhaseSpaceEnsemble(self.samples * np.exp(1j * phi), self.n_s, self.ordering)


def heterodyne_efficiency(s: float) -> float:
    """Detection efficiency whose heterodyne statistics are the s-ordered Wigner function."""
    return 2.0 / (1.0 - s)


def homodyne_efficiency(s: float) -> float:
    """Detection efficiency whose homodyne statistics are the s-ordered marginal."""
    return 1.0 / (1.0 - s)


def _sample_gaussian(center: complex, sigma: float, count: int, seed: int, threads: int) -> np.ndarray:
    def block(index: int, start: int, stop: int) -> np.ndarray:
        rng = block_generator(seed, StreamDomain.SAMPLING, index)
        z = rng.standard_normal((stop - start, 2))
        return center + sigma * (z[:, 0] + 1j * z[:, 1])

    return concatenate(map_blocks(block, count, threads))


def wigner_sample_coherent(
    alpha: complex, n_s: float, count: int, seed: int, threads: int = 1
) -> PhaseSpaceEnsemble:
    """Samples of the Wigner function of |α⟩, with ⟨|u − α/√n_s|²⟩ = 1/(2n_s)."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    sigma = 1.0 / (2.0 * math.sqrt(n_s))
    samples = _sample_gaussian(complex(alpha) / math.sqrt(n_s), sigma, count, seed, threads)
    return PhaseSpaceEnsemble(samples=samples, n_s=n_s)


def gaussian_ensemble(
    mean: complex, variance: float, n_s: float, count: int, seed: int, threads: int = 1
) -> PhaseSpaceEnsemble:
    """Complex Gaussian samples of u with centre mean/√n_s and total variance ⟨|u − ū|²⟩ = variance/n_s."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if variance < 0:
        raise ValueError(f"variance must be non-negative, got {variance}")
    sigma = math.sqrt(variance / (2.0 * n_s))
    samples = _sample_gaussian(complex(mean) / math.sqrt(n_s), sigma, count, seed, threads)
    return PhaseSpaceEnsemble(samples=samples, n_s=n_s)


def wigner_sample_thermal(
    mean: float, n_s: float, count: int, seed: int, alpha: complex = 0j, threads: int = 1
) -> PhaseSpaceEnsemble:
    """Samples of a (displaced) thermal Wigner function, total variance (m̄ + ½)/n_s."""
    if mean < 0:
        raise ValueError(f"mean must be non-negative, got {mean}")
    return gaussian_ensemble(alpha, mean + 0.5, n_s, count, seed, threads)


def moments_from_ensemble(e: PhaseSpaceEnsemble) -> MomentSet:
    """Normal-ordered number moments from symmetric-ordered samples.

    ⟨n⟩ = n_s⟨|u|²⟩ − ½ and ⟨Δn²⟩ = n_s²Var(|u|²) − ¼.
    """
    w = e.photons
    count = w.size
    w_mean = float(np.mean(w))
    centered = w - w_mean
    w_var = float(np.mean(centered ** 2))
    fourth = float(np.mean(centered ** 4))

    mean_photons = w_mean - 0.5
    photon_variance = w_var - 0.25
    mean_se = math.sqrt(w_var / count)
    variance_se = math.sqrt(max(fourth - w_var ** 2, 0.0) / count)

    flags = []
    if mean_photons < -5.0 * mean_se:
        message = f"negative photon mean {mean_photons:.4g} (se {mean_se:.2g}): ordering or cutoff pathology"
        logger.warning(message)
        flags.append(message)

    root = math.sqrt(e.n_s)
    return MomentSet(
        mean_amplitude=complex(root * np.mean(e.samples)),
        mean_photons=mean_photons,
        photon_variance=photon_variance,
        coherent_term=complex(e.n_s * np.mean(e.samples ** 2)),
        mean_photons_se=mean_se,
        photon_variance_se=variance_se,
        flags=tuple(flags),
    )


def number_hist_from_ensemble(e: PhaseSpaceEnsemble, n_max: int) -> PhotonDistribution:
    """Semiclassical photon counts n̂ = round(n_s|u|² − ½), clamped to [0, n_max]."""
    raw = np.rint(e.photons - 0.5)
    clamped_high = int(np.count_nonzero(raw > n_max))
    counts = np.bincount(np.clip(raw, 0, n_max).astype(np.int64), minlength=n_max + 1)

    flags = []
    fraction = clamped_high / e.count
    if fraction > CLAMP_WARN_FRACTION:
        message = f"{fraction:.2%} of samples clamped at n_max={n_max}"
        logger.warning(message)
        flags.append(message)
    return PhotonDistribution.from_counts(counts, e.count, flags)


@dataclass(frozen=True, eq=False)
class QuadratureMarginal:
    """Histogram density of x = Re(u)·√n_s with its sample mean and variance."""
    edges: np.ndarray
    density: np.ndarray
    mean: float
    variance: float
    mean_se: float


def homodyne_marginal(e: PhaseSpaceEnsemble, bins: Union[int, Sequence[float]] = 64) -> QuadratureMarginal:
    x = e.samples.real * math.sqrt(e.n_s)
    density, edges = np.histogram(x, bins=bins, density=True)
    variance = float(np.var(x))
    return QuadratureMarginal(
        edges=edges,
        density=density,
        mean=float(np.mean(x)),
        variance=variance,
        mean_se=math.sqrt(variance / x.size),
    )
