"""
Quantum-jump (Monte Carlo wave-function) integration of the one-atom laser
master equation, and a dense density-matrix integrator for tiny cutoffs.

Joint basis: atom ⊗ field, atom index 0 = excited, 1 = ground, field n = 0..n_max.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .laser_fpe import AtomFieldRates, LaserParams
from .logging_utils import log_function
from .states import PhotonDistribution, total_variation, total_variation_error
from .streams import StreamDomain, block_generator, map_blocks

logger = logging.getLogger(__name__)

# Trajectories per random-stream block
QJ_BLOCK_SIZE = 16
MAX_JUMP_PROBABILITY = 0.1
DEFAULT_JUMP_PROBABILITY = 0.05
DEFAULT_CUTOFF_TOL = 1e-6
TRACE_TOL = 1e-8
GENERATOR_TOL = 1e-10
DM_MAX_CUTOFF = 6

SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]])
SIGMA_MINUS = SIGMA_PLUS.T
SIGMA_Z = np.diag([1.0, -1.0])


class CutoffError(RuntimeError):
    """Population reached the field cutoff."""

    def __init__(self, n_max: int, population: float, time: float):
        self.n_max = n_max
        self.population = population
        self.suggested_n_max = int(math.ceil(1.5 * n_max)) + 1
        super().__init__(
            f"population {population:.3e} in level n_max={n_max} at t={time:.4g}; "
            f"try n_max >= {self.suggested_n_max}"
        )


class StepSizeError(RuntimeError):
    """The time step is too large for the requested accuracy or stability."""


# ── Operators ────────────────────────────────────────────────────────

def annihilation(n_max: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_max + 1)), offsets=1, format="csr")


@dataclass(frozen=True, eq=False)
class JointStateVector:
    amplitudes: np.ndarray
    n_max: int

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.shape != (2 * (self.n_max + 1),):
            raise ValueError(f"expected {2 * (self.n_max + 1)} amplitudes, got {amplitudes.shape}")
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if not 0.0 < norm <= 1.0 + 1e-12:
            raise ValueError(f"norm must lie in (0, 1], got {norm}")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def product(cls, field_amplitudes, excited: bool = False) -> JointStateVector:
        field_amplitudes = np.asarray(field_amplitudes, dtype=complex)
        atom = np.array([1.0, 0.0]) if excited else np.array([0.0, 1.0])
        vector = np.kron(atom, field_amplitudes)
        return cls(vector / np.linalg.norm(vector), field_amplitudes.size - 1)

    @classmethod
    def fock(cls, m: int, n_max: int, excited: bool = False) -> JointStateVector:
        field_amplitudes = np.zeros(n_max + 1, dtype=complex)
        field_amplitudes[m] = 1.0
        return cls.product(field_amplitudes, excited)

    def field_probs(self) -> np.ndarray:
        return field_probs(self.amplitudes[None, :], self.n_max)[0]


def field_probs(states: np.ndarray, n_max: int) -> np.ndarray:
    """Photon-number distribution of each row, traced over the atom."""
    return (np.abs(states.reshape(states.shape[0], 2, n_max + 1)) ** 2).sum(axis=1)


@dataclass(frozen=True)
class CollapseChannel:
    label: str
    rate: float
    operator: sp.csr_matrix


@dataclass(frozen=True, eq=False)
class JumpOperatorSet:
    """Collapse channels with positive rate, H_af and H_eff = H_af − (i/2)·Σ rate·A†A."""
    channels: Tuple[CollapseChannel, ...]
    hamiltonian: sp.csr_matrix
    effective: sp.csr_matrix
    n_max: int

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(channel.label for channel in self.channels)

    @property
    def dimension(self) -> int:
        return 2 * (self.n_max + 1)

    def rate_norm(self) -> float:
        """Σ rate·‖A†A‖, an upper bound of the total jump rate."""
        total = 0.0
        for channel in self.channels:
            # every A†A used here is diagonal
            total += channel.rate * float(np.max(np.abs((channel.operator.T.conj() @ channel.operator).diagonal())))
        return total

    def consistency_error(self) -> float:
        """‖anti-Hermitian part of H_eff + ½Σ rate·A†A‖_max."""
        anti = (self.effective - self.effective.T.conj()) / 2j
        decay = sum((0.5 * c.rate * (c.operator.T.conj() @ c.operator) for c in self.channels),
                    sp.csr_matrix(anti.shape, dtype=complex))
        residual = (anti + decay).toarray()
        return float(np.max(np.abs(residual))) if residual.size else 0.0


def build_generators_from_rates(rates: AtomFieldRates, sigma0: float, n_max: int) -> JumpOperatorSet:
    if rates.N != 1:
        raise ValueError(f"quantum-jump simulation is one-atom only, got N={rates.N}")
    dephasing = 0.5 * (rates.gamma_perp - 0.5 * rates.gamma_par)
    if dephasing < -1e-12 * rates.gamma_perp:
        raise ValueError(
            f"gamma_perp={rates.gamma_perp} < gamma_par/2={0.5 * rates.gamma_par}: negative dephasing rate"
        )
    eye_atom = sp.identity(2, format="csr")
    eye_field = sp.identity(n_max + 1, format="csr")
    a = sp.kron(eye_atom, annihilation(n_max), format="csr")
    plus = sp.kron(sp.csr_matrix(SIGMA_PLUS), eye_field, format="csr")
    minus = sp.kron(sp.csr_matrix(SIGMA_MINUS), eye_field, format="csr")
    z = sp.kron(sp.csr_matrix(SIGMA_Z), eye_field, format="csr")

    candidates = [
        ("pump", 0.5 * rates.gamma_par * (1.0 + sigma0), plus),
        ("atomic_decay", 0.5 * rates.gamma_par * (1.0 - sigma0), minus),
        ("dephasing", max(dephasing, 0.0), z),
        ("cavity", rates.gamma, a),
    ]
    channels = tuple(
        CollapseChannel(label, float(rate), op.astype(complex))
        for label, rate, op in candidates if rate > 0
    )

    # −i[H, R] = g[σ₊a − σ₋a†, R]
    hamiltonian = (1j * rates.g * (plus @ a - a.T @ minus)).tocsr()
    decay = sum((c.rate * (c.operator.T.conj() @ c.operator) for c in channels),
                sp.csr_matrix((2 * (n_max + 1),) * 2, dtype=complex))
    effective = (hamiltonian - 0.5j * decay).tocsr()

    ops = JumpOperatorSet(channels=channels, hamiltonian=hamiltonian, effective=effective, n_max=n_max)
    error = ops.consistency_error()
    if error > GENERATOR_TOL:
        raise ValueError(f"effective generator inconsistent with collapse set (residual {error:.2e})")
    return ops


def build_generators(p: LaserParams, n_max: int) -> JumpOperatorSet:
    """One-atom collapse set and H_af reconstructed from the laser parameters."""
    if p.N != 1:
        raise ValueError(f"quantum-jump simulation is one-atom only, got N={p.N}")
    return build_generators_from_rates(AtomFieldRates.from_laser(p), p.sigma0, n_max)


# ── Trajectories ─────────────────────────────────────────────────────

def default_dt(ops: JumpOperatorSet) -> float:
    return DEFAULT_JUMP_PROBABILITY / ops.rate_norm()


def _check_step(ops: JumpOperatorSet, dt: float):
    bound = dt * ops.rate_norm()
    if bound >= MAX_JUMP_PROBABILITY:
        raise StepSizeError(
            f"dt={dt:.3e} allows jump probability {bound:.3f} per step; "
            f"use dt < {MAX_JUMP_PROBABILITY / ops.rate_norm():.3e}"
        )


def _no_jump(states: np.ndarray, generator: sp.csr_matrix, dt: float) -> np.ndarray:
    """RK4 step of dψ/dt = −i·H_eff·ψ for each row."""
    def rhs(psi):
        return -1j * (generator @ psi.T).T

    k1 = rhs(states)
    k2 = rhs(states + 0.5 * dt * k1)
    k3 = rhs(states + 0.5 * dt * k2)
    k4 = rhs(states + dt * k3)
    return states + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def mcwf_step(states: np.ndarray, ops: JumpOperatorSet, dt: float,
              uniforms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """One first-order jump/no-jump resolution for each row of states.

    uniforms has shape (n_traj, 2): the jump draw and the channel draw.
    Returns normalized states and the channel index per row (−1: no jump).
    """
    evolved = _no_jump(states, ops.effective, dt)
    kept = np.sum(np.abs(evolved) ** 2, axis=1)
    jumps = uniforms[:, 0] < 1.0 - kept
    channel = np.full(states.shape[0], -1, dtype=np.int64)

    if np.any(jumps):
        rows = np.flatnonzero(jumps)
        pre = states[rows]
        candidates = [(c.operator @ pre.T).T for c in ops.channels]
        weights = np.stack(
            [c.rate * np.sum(np.abs(out) ** 2, axis=1) for c, out in zip(ops.channels, candidates)],
            axis=1,
        )
        cumulative = np.cumsum(weights, axis=1)
        total = cumulative[:, -1]
        target = uniforms[rows, 1] * total
        above = cumulative > target[:, None]
        # a target rounded onto the total falls to the last channel with weight
        last_live = weights.shape[1] - 1 - np.argmax(weights[:, ::-1] > 0, axis=1)
        picks = np.where(above.any(axis=1), np.argmax(above, axis=1), last_live)
        live = total > 0
        if not np.all(live):
            logger.debug(f"{int(np.count_nonzero(~live))} rows drew a jump with zero total weight; kept no-jump")
        for k in range(len(ops.channels)):
            chosen = live & (picks == k)
            if np.any(chosen):
                evolved[rows[chosen]] = candidates[k][chosen]
        channel[rows[live]] = picks[live]

    norms = np.sqrt(np.sum(np.abs(evolved) ** 2, axis=1))
    return evolved / norms[:, None], channel


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Field distributions per trajectory and snapshot time."""
    times: np.ndarray
    field_probs: np.ndarray
    jump_counts: np.ndarray
    labels: Tuple[str, ...]
    flags: Tuple[str, ...] = field(default=())

    @property
    def n_traj(self) -> int:
        return self.field_probs.shape[0]

    @property
    def n_max(self) -> int:
        return self.field_probs.shape[2] - 1

    def mean_photons(self) -> np.ndarray:
        return self.field_probs @ np.arange(self.n_max + 1)

    def distribution_at(self, index: int) -> PhotonDistribution:
        """Ensemble distribution at one snapshot with across-trajectory standard errors."""
        per_traj = self.field_probs[:, index, :]
        return _ensemble_distribution(per_traj)


def _ensemble_distribution(per_traj: np.ndarray, flags=()) -> PhotonDistribution:
    probs = per_traj.mean(axis=0)
    count = per_traj.shape[0]
    errors = per_traj.std(axis=0, ddof=1) / math.sqrt(count) if count > 1 else np.zeros_like(probs)
    return PhotonDistribution(probs=np.clip(probs, 0.0, None), errors=errors, flags=tuple(flags))


@log_function
def qj_trajectories(initial: JointStateVector, ops: JumpOperatorSet, dt: float, t_total: float,
                    n_traj: int, seed: int, record_every: Optional[float] = None,
                    record_from: float = 0.0, threads: int = 1,
                    cutoff_tol: float = DEFAULT_CUTOFF_TOL) -> TrajectoryRecord:
    """Batched MCWF trajectories, recording field distributions every record_every.

    Trajectory i uses the stream of block i // QJ_BLOCK_SIZE, so records do
    not depend on the thread count.
    """
    if initial.n_max != ops.n_max:
        raise ValueError(f"state cutoff {initial.n_max} != generator cutoff {ops.n_max}")
    _check_step(ops, dt)
    steps = max(1, int(round(t_total / dt)))
    dt = t_total / steps
    every = max(1, int(round((record_every or t_total) / dt)))
    first = int(math.ceil(record_from / dt - 1e-9))
    record_steps = [k for k in range(first, steps + 1) if k % every == 0]
    times = np.array(record_steps, dtype=float) * dt
    n_max = ops.n_max
    n_channels = len(ops.channels)

    def block(index: int, start: int, stop: int):
        rng = block_generator(seed, StreamDomain.QJUMP, index)
        states = np.tile(initial.amplitudes / np.linalg.norm(initial.amplitudes), (stop - start, 1))
        snapshots = np.empty((stop - start, len(record_steps), n_max + 1))
        counts = np.zeros(n_channels, dtype=np.int64)
        slot = 0
        for k in range(steps + 1):
            if slot < len(record_steps) and record_steps[slot] == k:
                probs = field_probs(states, n_max)
                top = float(probs[:, n_max].max())
                if top > cutoff_tol:
                    raise CutoffError(n_max, top, k * dt)
                snapshots[:, slot, :] = probs
                slot += 1
            if k == steps:
                break
            states, channel = mcwf_step(states, ops, dt, rng.random((stop - start, 2)))
            counts += np.bincount(channel[channel >= 0], minlength=n_channels)
        return snapshots, counts

    parts = map_blocks(block, n_traj, threads, block_size=QJ_BLOCK_SIZE)
    return TrajectoryRecord(
        times=times,
        field_probs=np.concatenate([part[0] for part in parts]),
        jump_counts=sum(part[1] for part in parts),
        labels=ops.labels,
    )


def qj_trajectory(initial: JointStateVector, ops: JumpOperatorSet, dt: float, t_total: float,
                  seed: int, record_every: Optional[float] = None,
                  cutoff_tol: float = DEFAULT_CUTOFF_TOL) -> TrajectoryRecord:
    """A single trajectory."""
    return qj_trajectories(initial, ops, dt, t_total, 1, seed, record_every=record_every,
                           cutoff_tol=cutoff_tol)


# ── Stationary statistics ────────────────────────────────────────────

@dataclass(frozen=True)
class WindowSplit:
    distance: float
    error: float

    @property
    def stationary(self) -> bool:
        return self.distance <= self.error


def window_split_distance(first: np.ndarray, second: np.ndarray) -> WindowSplit:
    """TV distance between per-trajectory window averages of two consecutive windows."""
    a = _ensemble_distribution(first)
    b = _ensemble_distribution(second)
    return WindowSplit(distance=total_variation(a, b), error=total_variation_error(a, b))


@log_function
def stationary_number_dist(p: LaserParams, n_max: int, burn_in: float, t_avg: float, n_traj: int,
                           seed: int, dt: Optional[float] = None, record_every: Optional[float] = None,
                           threads: int = 1, cutoff_tol: float = DEFAULT_CUTOFF_TOL) -> PhotonDistribution:
    """Time-and-ensemble averaged field distribution after burn_in, from ground state and vacuum."""
    ops = build_generators(p, n_max)
    rates = AtomFieldRates.from_laser(p)
    slowest = min(rates.gamma_par, rates.gamma_perp, rates.gamma)
    if burn_in < 10.0 / slowest:
        raise ValueError(f"burn_in={burn_in} shorter than 10/min(γ_∥, γ_⊥, γ) = {10.0 / slowest:.4g}")

    dt = dt or default_dt(ops)
    record_every = record_every or 0.1 / p.gamma
    initial = JointStateVector.fock(0, n_max, excited=False)
    record = qj_trajectories(initial, ops, dt, burn_in + t_avg, n_traj, seed,
                             record_every=record_every, record_from=burn_in,
                             threads=threads, cutoff_tol=cutoff_tol)

    per_traj = record.field_probs
    half = per_traj.shape[1] // 2
    flags: List[str] = []
    if half >= 1:
        split = window_split_distance(per_traj[:, :half].mean(axis=1), per_traj[:, half:].mean(axis=1))
        if not split.stationary:
            message = (f"averaging window not stationary: half-window TV {split.distance:.4f} "
                       f"> error {split.error:.4f}")
            logger.warning(message)
            flags.append(message)
    logger.info(f"qjump jumps per channel: {dict(zip(record.labels, record.jump_counts.tolist()))}")
    return _ensemble_distribution(per_traj.mean(axis=1), flags)


# ── Density-matrix oracle ────────────────────────────────────────────

def liouvillian(ops: JumpOperatorSet) -> np.ndarray:
    """Dense superoperator acting on row-major vec(ρ)."""
    dim = ops.dimension
    eye = np.eye(dim)
    h = ops.hamiltonian.toarray()
    generator = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for channel in ops.channels:
        a = channel.operator.toarray()
        ada = a.conj().T @ a
        generator += channel.rate * (
            np.kron(a, a.conj()) - 0.5 * np.kron(ada, eye) - 0.5 * np.kron(eye, ada.T)
        )
    return generator


@dataclass(frozen=True, eq=False)
class DensityEvolution:
    rho: np.ndarray
    field_probs: np.ndarray
    max_trace_drift: float
    max_hermiticity_error: float


def dm_evolve(ops: JumpOperatorSet, initial: JointStateVector, t: float,
              dt: Optional[float] = None) -> DensityEvolution:
    """Fixed-step RK4 integration of ∂_t R = L R."""
    if ops.n_max > DM_MAX_CUTOFF:
        raise ValueError(f"dense integration limited to n_max <= {DM_MAX_CUTOFF}, got {ops.n_max}")
    generator = liouvillian(ops)
    scale = max(np.max(np.abs(np.linalg.eigvals(generator))), 1e-12)
    steps = max(1, int(math.ceil(t / (dt or 0.05 / scale))))
    dt = t / steps
    psi = initial.amplitudes / np.linalg.norm(initial.amplitudes)
    dim = ops.dimension
    vec = np.outer(psi, psi.conj()).reshape(-1)

    drift = 0.0
    hermiticity = 0.0
    for step in range(steps):
        k1 = generator @ vec
        k2 = generator @ (vec + 0.5 * dt * k1)
        k3 = generator @ (vec + 0.5 * dt * k2)
        k4 = generator @ (vec + dt * k3)
        vec = vec + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = vec.reshape(dim, dim)
        drift = max(drift, abs(np.trace(rho) - 1.0))
        if drift > TRACE_TOL or np.max(np.abs(rho)) > 1.0 + TRACE_TOL:
            raise StepSizeError(f"density-matrix integration unstable at step {step} (dt={dt:.3e})")
        reduced = np.einsum("aiaj->ij", rho.reshape(2, ops.n_max + 1, 2, ops.n_max + 1))
        hermiticity = max(hermiticity, float(np.max(np.abs(reduced - reduced.conj().T))))

    rho = vec.reshape(dim, dim)
    field = np.real(np.diagonal(np.einsum("aiaj->ij", rho.reshape(2, ops.n_max + 1, 2, ops.n_max + 1))))
    return DensityEvolution(rho=rho, field_probs=np.clip(field, 0.0, None),
                            max_trace_drift=drift, max_hermiticity_error=hermiticity)


def dm_integrate_oracle(p: Union[LaserParams, JumpOperatorSet], n_max: int, t: float,
                        initial: Optional[JointStateVector] = None,
                        dt: Optional[float] = None) -> PhotonDistribution:
    """Field distribution at time t from direct master-equation integration."""
    ops = p if isinstance(p, JumpOperatorSet) else build_generators(p, n_max)
    initial = initial or JointStateVector.fock(0, ops.n_max, excited=False)
    evolution = dm_evolve(ops, initial, t, dt)
    return PhotonDistribution(probs=evolution.field_probs)
