"""
Saturable laser amplifier in the Wigner representation.

Provides:
- LaserParams and the atom-field rates (γ_∥, γ_⊥, g) they encode
- drift_at / diffusion_at: Haake–Lewenstein Fokker–Planck coefficients in u = α/√n_s
- real_diffusion_matrix / em_step: Euler–Maruyama (Itô) Langevin integration
- evolve_ensemble / stationary_histogram: block-parallel ensemble engines
- validity_check, gain helpers and the linear-regime PIA equivalent
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Protocol, Tuple, Union

import numpy as np

from .logging_utils import log_function
from .pia import PiaParams
from .states import (
    PhaseSpaceEnsemble,
    PhotonDistribution,
    wigner_sample_coherent,
)
from .streams import (
    StreamDomain,
    block_generator,
    concatenate,
    map_blocks,
)

logger = logging.getLogger(__name__)

DEFAULT_GAMMA_DT = 1e-3
DEFAULT_STRICTNESS = 10.0
EIGEN_TOL = 1e-12
THRESHOLD_TOL = 1e-9


class NonDiffusiveRegion(RuntimeError):
    """The real-coordinate diffusion matrix has a negative eigenvalue."""

    def __init__(self, u: complex, eigenvalues: Tuple[float, float],
                 trajectory: Optional[int] = None, time: Optional[float] = None):
        self.u = u
        self.eigenvalues = eigenvalues
        self.trajectory = trajectory
        self.time = time
        where = ""
        if trajectory is not None:
            where = f" (trajectory {trajectory}, t={time:.6g})"
        super().__init__(
            f"diffusion not positive semidefinite at u={u:.6g}: eigenvalues "
            f"{eigenvalues[0]:.3e}, {eigenvalues[1]:.3e}{where}"
        )


class ThresholdSingularityError(ValueError):
    """The laser sits exactly at threshold, 2Cσ₀ = 1."""


class ValidityError(ValueError):
    """Parameters violate the adiabatic/saturation conditions and no override was given."""


# ── Parameters ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class LaserParams:
    C: float
    sigma0: float
    N: int
    gamma: float
    f: float
    n_s: float

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not -1.0 <= self.sigma0 <= 1.0:
            raise ValueError(f"sigma0 must lie in [-1, 1], got {self.sigma0}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.f <= 0:
            raise ValueError(f"f must be positive, got {self.f}")
        if self.n_s <= 0:
            raise ValueError(f"n_s must be positive, got {self.n_s}")
        object.__setattr__(self, "N", int(self.N))


@dataclass(frozen=True)
class AtomFieldRates:
    """Microscopic rates behind LaserParams.

    f = γ_∥/(2γ_⊥), C = g²N/(γγ_⊥), n_s = γ_∥γ_⊥/(4g²).
    """
    gamma_par: float
    gamma_perp: float
    g: float
    gamma: float
    N: int = 1

    @classmethod
    def from_laser(cls, p: LaserParams) -> AtomFieldRates:
        gamma_perp = 2.0 * p.n_s * p.gamma * p.C / (p.f * p.N)
        return cls(
            gamma_par=2.0 * p.f * gamma_perp,
            gamma_perp=gamma_perp,
            g=gamma_perp * math.sqrt(p.f / (2.0 * p.n_s)),
            gamma=p.gamma,
            N=p.N,
        )

    def to_laser(self, sigma0: float) -> LaserParams:
        if self.g == 0:
            raise ValueError("g = 0 has no laser parametrization (C = 0, n_s infinite)")
        return LaserParams(
            C=self.g ** 2 * self.N / (self.gamma * self.gamma_perp),
            sigma0=sigma0,
            N=self.N,
            gamma=self.gamma,
            f=self.gamma_par / (2.0 * self.gamma_perp),
            n_s=self.gamma_par * self.gamma_perp / (4.0 * self.g ** 2),
        )


@dataclass(frozen=True)
class DriftDiffusion:
    """Q_u, D_uu and D_uu* at one point (or elementwise over an array of points)."""
    q_u: Union[complex, np.ndarray]
    d_uu: Union[complex, np.ndarray]
    d_uustar: Union[float, np.ndarray]


@dataclass(frozen=True)
class ValidityReport:
    adiabatic_ok: bool
    trace_time_ok: bool
    saturation_ok: bool
    margins: Dict[str, float]
    strictness: float = DEFAULT_STRICTNESS

    @property
    def passed(self) -> bool:
        return self.adiabatic_ok and self.trace_time_ok and self.saturation_ok

    def failures(self) -> list:
        return sorted(name for name, margin in self.margins.items() if margin <= self.strictness)


# ── Coefficients ─────────────────────────────────────────────────────

def drift_at(u, p: LaserParams):
    """Q_u(|u|²); the drift field is −u·Q_u."""
    w = np.abs(u) ** 2
    s = 1.0 + w
    C, s0, N, f, ns = p.C, p.sigma0, p.N, p.f, p.n_s
    bracket = (
        1.0
        - 2.0 * s0 * C / s
        + s0 * N / (2.0 * ns * s ** 3) * ((1.0 + f) * w - f)
        + s0 ** 2 * C * f / (ns * s ** 4) * (N * (1.0 - w) - 2.0 * w)
        + C / (2.0 * ns * s ** 4) * (-2.0 * s0 ** 2 * N * w + s0 ** 2 * (1.0 - w) + (3.0 + w) * s ** 2)
    )
    return 0.5 * p.gamma * bracket + 0j


def diffusion_at(u, p: LaserParams) -> DriftDiffusion:
    w = np.abs(u) ** 2
    s = 1.0 + w
    C, s0, f, ns, gamma = p.C, p.sigma0, p.f, p.n_s, p.gamma
    d_uu = -C * gamma * np.asarray(u) ** 2 / (4.0 * ns * s ** 3) * (s0 ** 2 * (1.0 + 2.0 * f) + s ** 2)
    d_uustar = 0.25 * gamma * (1.0 / ns + C / (ns * s ** 3) * (s ** 2 * (2.0 + w) - w * s0 ** 2 * (1.0 + 2.0 * f)))
    if np.ndim(u) == 0:
        d_uu = complex(d_uu)
        d_uustar = float(d_uustar)
    return DriftDiffusion(q_u=drift_at(u, p), d_uu=d_uu, d_uustar=d_uustar)


class DiffusionModel(Protocol):
    def coefficients(self, u: np.ndarray) -> DriftDiffusion: ...


@dataclass(frozen=True)
class HaakeLewensteinModel:
    params: LaserParams

    def coefficients(self, u: np.ndarray) -> DriftDiffusion:
        return diffusion_at(u, self.params)


@dataclass(frozen=True)
class ConstantCoefficientModel:
    """Q_u ≡ Q, D_uu ≡ 0, D_uu* ≡ D: the linear Gaussian channel."""
    Q: float
    D: float

    def coefficients(self, u: np.ndarray) -> DriftDiffusion:
        shape = np.shape(u)
        return DriftDiffusion(
            q_u=np.full(shape, self.Q, dtype=complex),
            d_uu=np.zeros(shape, dtype=complex),
            d_uustar=np.full(shape, self.D, dtype=float),
        )


def _as_model(p: Union[LaserParams, DiffusionModel]) -> DiffusionModel:
    if isinstance(p, LaserParams):
        return HaakeLewensteinModel(p)
    return p


# ── Real-coordinate diffusion ────────────────────────────────────────

def real_diffusion_matrix(dd: DriftDiffusion, u: complex = complex("nan")) -> np.ndarray:
    """M with Σᵢⱼ ∂ᵢ∂ⱼ(Mᵢⱼ W) equal to the complex diffusion part, u = x + iy.

    Raises NonDiffusiveRegion when an eigenvalue ½(D_uu* ± |D_uu|) is negative.
    """
    d = complex(dd.d_uu)
    dstar = float(dd.d_uustar)
    low = 0.5 * (dstar - abs(d))
    if low < -EIGEN_TOL:
        raise NonDiffusiveRegion(complex(u), (low, 0.5 * (dstar + abs(d))))
    return np.array([
        [0.5 * (dstar + d.real), 0.5 * d.imag],
        [0.5 * d.imag, 0.5 * (dstar - d.real)],
    ])


def _noise_factor(dd: DriftDiffusion, u: np.ndarray, offset: int, time: float):
    """Entries (b_xx, b_xy, b_yy) of the symmetric square root of 2M, elementwise."""
    d = np.asarray(dd.d_uu, dtype=complex)
    dstar = np.asarray(dd.d_uustar, dtype=float)
    modulus = np.abs(d)
    low = 0.5 * (dstar - modulus)
    bad = np.flatnonzero(np.atleast_1d(low) < -EIGEN_TOL)
    if bad.size:
        i = int(bad[0])
        point = complex(np.atleast_1d(u)[i])
        lows = np.atleast_1d(low)
        highs = np.atleast_1d(0.5 * (dstar + modulus))
        raise NonDiffusiveRegion(point, (float(lows[i]), float(highs[i])), offset + i, time)

    # 2M = [[a, b], [b, c]]; √A = (A + √det·I)/√(tr A + 2√det)
    a = dstar + d.real
    c = dstar - d.real
    b = d.imag
    root_det = np.sqrt(np.clip(a * c - b * b, 0.0, None))
    norm = np.sqrt(a + c + 2.0 * root_det)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(norm > 0, 1.0 / norm, 0.0)
    return (a + root_det) * scale, b * scale, (c + root_det) * scale


def em_step(u, p: Union[LaserParams, DiffusionModel], dt: float, noise,
            offset: int = 0, time: float = 0.0):
    """One Itô Euler–Maruyama step u' = u − u·Q_u·dt + B·ξ·√dt, B·Bᵀ = 2M.

    noise has shape (..., 2): one standard normal pair per point.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    model = _as_model(p)
    u = np.asarray(u, dtype=complex)
    noise = np.asarray(noise, dtype=float)
    dd = model.coefficients(u)
    b_xx, b_xy, b_yy = _noise_factor(dd, u, offset, time)
    root = math.sqrt(dt)
    dx = (b_xx * noise[..., 0] + b_xy * noise[..., 1]) * root
    dy = (b_xy * noise[..., 0] + b_yy * noise[..., 1]) * root
    result = u - u * dd.q_u * dt + dx + 1j * dy
    if result.ndim == 0:
        return complex(result)
    return result


def _integrate_block(u: np.ndarray, model: DiffusionModel, dt: float, steps: int,
                     rng: np.random.Generator, group: int = 1, offset: int = 0,
                     t0: float = 0.0) -> np.ndarray:
    """Integrate steps of size dt, each driven by the sum of `group` fine-grid normals.

    A run with (dt, group=2) consumes the same draws as one with (dt/2, group=1),
    so the two are noise-coupled.
    """
    scale = 1.0 / math.sqrt(group)
    for step in range(steps):
        xi = rng.standard_normal((group, u.size, 2)).sum(axis=0) * scale
        u = em_step(u, model, dt, xi, offset=offset, time=t0 + step * dt)
    return u


def _step_plan(t_total: float, dt: float) -> Tuple[int, float]:
    steps = max(1, int(round(t_total / dt)))
    return steps, t_total / steps


def _default_dt(p: Union[LaserParams, DiffusionModel]) -> float:
    if isinstance(p, LaserParams):
        return DEFAULT_GAMMA_DT / p.gamma
    if isinstance(p, HaakeLewensteinModel):
        return DEFAULT_GAMMA_DT / p.params.gamma
    return DEFAULT_GAMMA_DT


def _require_valid(p, t_total: float, strictness: float, allow_invalid: bool):
    if not isinstance(p, LaserParams) or t_total <= 0:
        return
    report = validity_check(p, t_total, strictness)
    if report.passed:
        return
    failed = ", ".join(report.failures())
    if not allow_invalid:
        raise ValidityError(f"laser parameters outside the FPE validity region: {failed}")
    logger.warning(f"validity override in effect; failing conditions: {failed}")


def _evolve(e: PhaseSpaceEnsemble, model: DiffusionModel, t_total: float, dt: float,
            seed: int, threads: int, group: int = 1) -> PhaseSpaceEnsemble:
    steps, step_dt = _step_plan(t_total, dt)
    coarse_dt = step_dt * group

    def block(index: int, start: int, stop: int) -> np.ndarray:
        rng = block_generator(seed, StreamDomain.LASER_NOISE, index)
        return _integrate_block(e.samples[start:stop].copy(), model, coarse_dt, steps // group,
                                rng, group=group, offset=start)

    if steps % group:
        raise ValueError(f"{steps} fine steps cannot be grouped by {group}")
    samples = concatenate(map_blocks(block, e.count, threads))
    return PhaseSpaceEnsemble(samples=samples, n_s=e.n_s, ordering=e.ordering)


@log_function
def evolve_ensemble(e: PhaseSpaceEnsemble, p: Union[LaserParams, DiffusionModel], t_total: float,
                    dt: Optional[float] = None, seed: int = 0, threads: int = 1,
                    strictness: float = DEFAULT_STRICTNESS,
                    allow_invalid: bool = False) -> PhaseSpaceEnsemble:
    """Integrate every sample independently for t_total.

    Sample i is driven by the noise of block i // BLOCK_SIZE, so the result
    depends on (seed, dt) only, never on the thread count.
    """
    if t_total < 0:
        raise ValueError(f"t_total must be non-negative, got {t_total}")
    if t_total == 0:
        return PhaseSpaceEnsemble(samples=e.samples.copy(), n_s=e.n_s, ordering=e.ordering)
    _require_valid(p, t_total, strictness, allow_invalid)
    return _evolve(e, _as_model(p), t_total, dt or _default_dt(p), seed, threads)


# ── Step-size refinement ─────────────────────────────────────────────

@dataclass(frozen=True)
class StepRefinement:
    dt: float
    halvings: int
    shifts_in_se: Tuple[float, ...]
    converged: bool


def _observables(e: PhaseSpaceEnsemble) -> Tuple[np.ndarray, np.ndarray]:
    """Means and standard errors of n_s|u|², √n_s·Re u, √n_s·Im u."""
    root = math.sqrt(e.n_s)
    columns = np.stack([e.photons, root * e.samples.real, root * e.samples.imag])
    means = columns.mean(axis=1)
    ses = columns.std(axis=1) / math.sqrt(e.count)
    return means, ses


@log_function
def refine_step(e: PhaseSpaceEnsemble, p: Union[LaserParams, DiffusionModel], t_total: float,
                dt: Optional[float] = None, seed: int = 0, threads: int = 1,
                max_halvings: int = 4) -> StepRefinement:
    """Halve dt until a noise-coupled run at dt/2 moves every ensemble mean by < 1 SE."""
    model = _as_model(p)
    dt = dt or _default_dt(p)
    shifts = []
    for halving in range(max_halvings + 1):
        _, dt = _step_plan(t_total, dt)
        fine = _evolve(e, model, t_total, dt / 2.0, seed, threads, group=1)
        coarse = _evolve(e, model, t_total, dt / 2.0, seed, threads, group=2)
        fine_means, fine_se = _observables(fine)
        coarse_means, _ = _observables(coarse)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(fine_se > 0, np.abs(fine_means - coarse_means) / fine_se, 0.0)
        shift = float(np.max(ratio))
        shifts.append(shift)
        logger.info(f"dt={dt:.3e}: max shift {shift:.3f} SE against dt/2")
        if shift < 1.0:
            return StepRefinement(dt=dt, halvings=halving, shifts_in_se=tuple(shifts), converged=True)
        dt /= 2.0
    logger.warning(f"step refinement did not converge after {max_halvings} halvings")
    return StepRefinement(dt=dt, halvings=max_halvings, shifts_in_se=tuple(shifts), converged=False)


# ── Validity and gain ────────────────────────────────────────────────

def validity_check(p: LaserParams, t: float, strictness: float = DEFAULT_STRICTNESS) -> ValidityReport:
    """Adiabatic, trace-time and saturation conditions as margin ratios.

    A "≪"/"≫" condition passes iff its ratio exceeds strictness.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    gt = p.gamma * t
    margins = {
        "adiabatic_inversion": 4.0 * p.C * p.n_s / p.N,
        "adiabatic_polarization": 2.0 * p.C * p.n_s / (p.N * p.f),
        "trace_time_inversion": 4.0 * p.n_s * p.C * gt / p.N,
        "trace_time_polarization": 2.0 * p.n_s * p.C * gt / (p.f * p.N),
        "saturation": 4.0 * p.n_s,
    }
    ok = {name: margin > strictness for name, margin in margins.items()}
    return ValidityReport(
        adiabatic_ok=ok["adiabatic_inversion"] and ok["adiabatic_polarization"],
        trace_time_ok=ok["trace_time_inversion"] and ok["trace_time_polarization"],
        saturation_ok=ok["saturation"],
        margins=margins,
        strictness=strictness,
    )


def above_threshold(p: LaserParams) -> bool:
    return p.sigma0 > 1.0 / (2.0 * p.C)


def small_signal_gain(p: LaserParams, t: float) -> float:
    """Photon-number gain exp(−2·Re Q_u(0)·t) of the drift linearised at the origin."""
    return math.exp(-2.0 * drift_at(0j, p).real * t)


def quoted_linear_gain(p: LaserParams, t: float) -> float:
    """exp[2γt(1 − 2σ₀C)] as commonly quoted; below 1 above threshold, reported only."""
    return math.exp(2.0 * p.gamma * t * (1.0 - 2.0 * p.sigma0 * p.C))


@dataclass(frozen=True)
class GainMeasurement:
    gain: float
    gain_se: float
    probe_photons: float


@log_function
def measure_small_signal_gain(p: LaserParams, t: float, count: int = 20000,
                              dt: Optional[float] = None, seed: int = 0, threads: int = 1,
                              probe_photons: Optional[float] = None) -> GainMeasurement:
    """Weak-probe gain |⟨u⟩_probe − ⟨u⟩_vacuum|²/|u₀|² from noise-coupled runs.

    Both runs share sampling and Langevin streams, so their difference
    isolates the response to the probe amplitude.
    """
    if probe_photons is None:
        probe_photons = 1e-3 * p.n_s
    alpha = math.sqrt(probe_photons)
    vacuum = wigner_sample_coherent(0j, p.n_s, count, seed, threads=threads)
    probe = PhaseSpaceEnsemble(samples=vacuum.samples + alpha / math.sqrt(p.n_s), n_s=p.n_s)
    model = HaakeLewensteinModel(p)
    step = dt or _default_dt(p)
    out_vacuum = _evolve(vacuum, model, t, step, seed, threads)
    out_probe = _evolve(probe, model, t, step, seed, threads)

    response = (out_probe.samples - out_vacuum.samples) * math.sqrt(p.n_s) / alpha
    mean = response.mean()
    se = float(response.std() / math.sqrt(count))
    gain = float(abs(mean) ** 2)
    return GainMeasurement(gain=gain, gain_se=2.0 * math.sqrt(gain) * se, probe_photons=probe_photons)


def linear_idler_photons(p: LaserParams) -> float:
    """n_b = min{C(1+σ₀), C(1−σ₀)+1}/|2Cσ₀ − 1|."""
    distance = abs(2.0 * p.C * p.sigma0 - 1.0)
    if distance < THRESHOLD_TOL:
        raise ThresholdSingularityError(
            f"2Cσ₀ = {2.0 * p.C * p.sigma0} is at threshold; idler occupancy diverges"
        )
    return min(p.C * (1.0 + p.sigma0), p.C * (1.0 - p.sigma0) + 1.0) / distance


def linear_equivalent_pia(p: LaserParams, t: float, count: int = 20000,
                          dt: Optional[float] = None, seed: int = 0,
                          threads: int = 1) -> PiaParams:
    """PIA with the measured small-signal gain and the linear-regime idler occupancy."""
    idler = linear_idler_photons(p)
    measured = measure_small_signal_gain(p, t, count=count, dt=dt, seed=seed, threads=threads)
    logger.info(
        f"linear equivalent: measured gain {measured.gain:.4f} ± {measured.gain_se:.1e}, "
        f"drift gain {small_signal_gain(p, t):.4f}, quoted {quoted_linear_gain(p, t):.4g}, n_b={idler:.4f}"
    )
    return PiaParams(gain_n=measured.gain, idler_photons=idler)


# ── Stationary statistics ────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class StationaryHistogram:
    distribution: PhotonDistribution
    mean_photons: float
    photon_variance: float
    snapshots: int
    flags: Tuple[str, ...] = field(default=())


@log_function
def stationary_histogram(p: LaserParams, n_max: int, burn_in: float, t_avg: float,
                         count: int, dt: Optional[float] = None, seed: int = 0,
                         snapshot_every: Optional[float] = None,
                         threads: int = 1) -> StationaryHistogram:
    """Time-and-ensemble averaged photon histogram of the FPE started from vacuum.

    Error bars are binomial in the trajectory count, which bounds the
    error of the time average from above.
    """
    step = dt or _default_dt(p)
    burn_steps, step = _step_plan(burn_in, step)
    avg_steps = max(1, int(round(t_avg / step)))
    every = max(1, int(round((snapshot_every or 0.1 / p.gamma) / step)))
    model = HaakeLewensteinModel(p)
    initial = wigner_sample_coherent(0j, p.n_s, count, seed, threads=threads)

    def block(index: int, start: int, stop: int):
        rng = block_generator(seed, StreamDomain.LASER_NOISE, index)
        u = _integrate_block(initial.samples[start:stop].copy(), model, step, burn_steps, rng,
                             offset=start)
        counts = np.zeros(n_max + 1, dtype=np.int64)
        clamped = 0
        snapshots = 0
        for k in range(avg_steps):
            u = em_step(u, model, step, rng.standard_normal((u.size, 2)), offset=start,
                        time=(burn_steps + k) * step)
            if (k + 1) % every == 0:
                raw = np.rint(p.n_s * np.abs(u) ** 2 - 0.5)
                clamped += int(np.count_nonzero(raw > n_max))
                counts += np.bincount(np.clip(raw, 0, n_max).astype(np.int64), minlength=n_max + 1)
                snapshots += 1
        return counts, clamped, snapshots

    parts = map_blocks(block, count, threads)
    counts = sum(part[0] for part in parts)
    clamped = sum(part[1] for part in parts)
    snapshots = parts[0][2]
    total = int(counts.sum())

    flags = []
    if clamped / total > 0.01:
        message = f"{clamped / total:.2%} of stationary samples clamped at n_max={n_max}"
        logger.warning(message)
        flags.append(message)

    probs = counts / total
    distribution = PhotonDistribution(
        probs=probs,
        errors=np.sqrt(probs * (1.0 - probs) / count),
        flags=tuple(flags),
    )
    return StationaryHistogram(
        distribution=distribution,
        mean_photons=distribution.mean,
        photon_variance=distribution.variance,
        snapshots=snapshots,
        flags=tuple(flags),
    )
