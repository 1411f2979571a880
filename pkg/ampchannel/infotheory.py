"""
Information measures for binary photon-counting channels.

Provides:
- DiscreteChannel / BinaryErrorPair / ThresholdDecision value types
- entropy, conditional entropy and mutual information of discrete channels
- bit-error-rate helpers and the optimal integer threshold between two photon distributions
- closed forms for the Gaussian channel (mutual information, BER)

All logarithms are base 2; 0·log 0 is taken as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import entr, erfc, rel_entr

if TYPE_CHECKING:
    from .states import PhotonDistribution

LN2 = math.log(2.0)
STOCHASTIC_TOL = 1e-12


class ChannelValidationError(ValueError):
    """Raised when probabilities do not form a valid channel."""


# ── Value types ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class BinaryErrorPair:
    """Error probabilities of a binary channel.

    q01: probability of detecting "0" when "1" was sent.
    q10: probability of detecting "1" when "0" was sent (false alarm).
    """
    q01: float
    q10: float

    def __post_init__(self):
        for name in ("q01", "q10"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ChannelValidationError(f"{name} must lie in [0, 1], got {value}")
            object.__setattr__(self, name, float(value))

    def as_channel(self) -> DiscreteChannel:
        """Equivalent 2×2 channel with equal priors (rows: sent 0, sent 1)."""
        return DiscreteChannel(
            priors=np.array([0.5, 0.5]),
            conditionals=np.array([
                [1.0 - self.q10, self.q10],
                [self.q01, 1.0 - self.q01],
            ]),
        )


@dataclass(frozen=True)
class DiscreteChannel:
    """Priors p_j and row-stochastic conditionals Q[j, k] = Q_{k|j}."""
    priors: np.ndarray
    conditionals: np.ndarray

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=float)
        conditionals = np.asarray(self.conditionals, dtype=float)
        if priors.ndim != 1 or conditionals.ndim != 2:
            raise ChannelValidationError("priors must be a vector and conditionals a matrix")
        if conditionals.shape[0] != priors.shape[0]:
            raise ChannelValidationError(
                f"conditionals has {conditionals.shape[0]} rows for {priors.shape[0]} input symbols"
            )
        if np.any(priors < 0) or np.any(conditionals < 0):
            raise ChannelValidationError("probabilities must be non-negative")
        if abs(priors.sum() - 1.0) > STOCHASTIC_TOL:
            raise ChannelValidationError(f"priors sum to {priors.sum()!r}, expected 1")
        row_sums = conditionals.sum(axis=1)
        bad = np.flatnonzero(np.abs(row_sums - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            raise ChannelValidationError(
                f"conditional row {int(bad[0])} sums to {row_sums[bad[0]]!r}, expected 1"
            )
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "conditionals", conditionals)


@dataclass(frozen=True)
class ThresholdDecision:
    """Decision "0" iff n ≤ threshold; ber is the average of the two error probabilities."""
    threshold: int
    ber: float
    errors: BinaryErrorPair


# ── Entropies and mutual information ─────────────────────────────────

def entropy(p) -> float:
    """Shannon entropy in bits."""
    p = np.asarray(p, dtype=float)
    return float(entr(p).sum() / LN2)


def output_distribution(ch: DiscreteChannel) -> np.ndarray:
    """q_k = Σ_j p_j Q_{k|j}."""
    return ch.priors @ ch.conditionals


def posterior(ch: DiscreteChannel) -> np.ndarray:
    """P[j, k] = P_{j|k}; columns of unreachable outputs are zero."""
    joint = ch.priors[:, None] * ch.conditionals
    q = joint.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(q > 0, joint / q, 0.0)
    return post


def conditional_entropy(ch: DiscreteChannel) -> float:
    """H(X|Y) = Σ_k q_k H(P_{·|k})."""
    q = output_distribution(ch)
    post = posterior(ch)
    return float((q * entr(post).sum(axis=0)).sum() / LN2)


def discrete_mutual_information(ch: DiscreteChannel) -> float:
    """I(X;Y) = Σ_jk p_j Q_{k|j} log2(Q_{k|j} / q_k)."""
    q = output_distribution(ch)
    divergence = rel_entr(ch.conditionals, q[None, :])
    with np.errstate(invalid="ignore"):
        terms = np.where(ch.priors[:, None] > 0, ch.priors[:, None] * divergence, 0.0)
    return max(0.0, float(terms.sum() / LN2))


def binary_mutual_information(e: BinaryErrorPair) -> float:
    """Mutual information of the binary channel with equal priors."""
    return discrete_mutual_information(e.as_channel())


def ber(e: BinaryErrorPair) -> float:
    return 0.5 * (e.q01 + e.q10)


def small_error_expansion_check(e: BinaryErrorPair) -> float:
    """|I − (1 − B)|, the error of the first-order small-error equivalence."""
    if e.q01 > 0.1 or e.q10 > 0.1:
        raise ValueError(f"expansion only holds for small errors, got ({e.q01}, {e.q10})")
    return abs(binary_mutual_information(e) - (1.0 - ber(e)))


# ── Threshold decoding ───────────────────────────────────────────────

def threshold_scan(p0, p1) -> np.ndarray:
    """BER for every threshold θ = 0..n_max with the rule "0" iff n ≤ θ.

    Accepts PhotonDistribution objects or raw probability vectors.
    Errors are summed over the stored bins only.
    """
    probs0 = np.asarray(getattr(p0, "probs", p0), dtype=float)
    probs1 = np.asarray(getattr(p1, "probs", p1), dtype=float)
    if probs0.shape != probs1.shape:
        raise ValueError(
            f"distributions must share n_max, got {probs0.size - 1} and {probs1.size - 1}"
        )
    q01 = np.cumsum(probs1)
    q10 = probs0.sum() - np.cumsum(probs0)
    return 0.5 * (q01 + q10)


def optimal_threshold(p0: PhotonDistribution, p1: PhotonDistribution) -> ThresholdDecision:
    """Integer threshold minimising the BER; ties go to the smallest θ."""
    probs0 = np.asarray(p0.probs, dtype=float)
    probs1 = np.asarray(p1.probs, dtype=float)
    scan = threshold_scan(probs0, probs1)
    theta = int(np.argmin(scan))
    q01 = float(np.clip(probs1[: theta + 1].sum(), 0.0, 1.0))
    q10 = float(np.clip(probs0[theta + 1:].sum(), 0.0, 1.0))
    errors = BinaryErrorPair(q01=q01, q10=q10)
    return ThresholdDecision(threshold=theta, ber=ber(errors), errors=errors)


# ── Gaussian closed forms ────────────────────────────────────────────

def gaussian_mutual_information(signal_var: float, noise_var: float) -> float:
    """½ log2(1 + δ²/Δ²)."""
    if noise_var <= 0:
        raise ValueError(f"noise variance must be positive, got {noise_var}")
    if signal_var < 0:
        raise ValueError(f"signal variance must be non-negative, got {signal_var}")
    return 0.5 * math.log2(1.0 + signal_var / noise_var)


def gaussian_ber(snr: float) -> float:
    """BER of two equal-variance Gaussians at the midpoint threshold.

    B = ½ erfc(√(snr/8)), i.e. 1 − Φ(√(snr/8)) with Φ(x) = ½[1 + erf x].
    The standard normal tail at √snr/2 gives the same number.
    """
    if snr < 0:
        raise ValueError(f"snr must be non-negative, got {snr}")
    return float(0.5 * erfc(math.sqrt(snr / 8.0)))


def gaussian_ber_asymptotic(snr: float) -> float:
    """Large-snr form ½·√(8/(π·snr))·exp(−snr/8) of gaussian_ber."""
    if snr <= 0:
        raise ValueError(f"snr must be positive, got {snr}")
    return 0.5 * math.sqrt(8.0 / (math.pi * snr)) * math.exp(-snr / 8.0)
