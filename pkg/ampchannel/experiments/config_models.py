# config_models.py

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from ..laser_fpe import LaserParams
from ..pia import PiaParams
from ..states import MomentSet, coherent_moments, fock_moments


class AmplifierKind(str, Enum):
    """Which channel carries the bits."""
    PIA = "pia"
    PNA = "pna"
    LASER_FPE = "laser_fpe"
    QJUMP = "qjump"


class InputKind(str, Enum):
    COHERENT = "coherent"
    FOCK = "fock"


@dataclass(frozen=True)
class PnaParams:
    gain_n: int

    def __post_init__(self):
        if int(self.gain_n) != self.gain_n or self.gain_n < 1:
            raise ValueError(f"gain_n must be a positive integer, got {self.gain_n}")
        object.__setattr__(self, "gain_n", int(self.gain_n))


@dataclass(frozen=True)
class LaserRunParams:
    """Laser parameters plus the interaction time t."""
    C: float
    sigma0: float
    N: int
    gamma: float
    f: float
    n_s: float
    t: float
    allow_invalid: bool = False

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        self.laser  # validates the physics block

    @property
    def laser(self) -> LaserParams:
        return LaserParams(C=self.C, sigma0=self.sigma0, N=self.N, gamma=self.gamma, f=self.f, n_s=self.n_s)


@dataclass(frozen=True)
class QjumpRunParams:
    """One-atom laser driven for t, integrated by quantum jumps."""
    C: float
    sigma0: float
    gamma: float
    f: float
    n_s: float
    t: float
    cutoff_tol: float = 1e-6

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        self.laser

    @property
    def laser(self) -> LaserParams:
        return LaserParams(C=self.C, sigma0=self.sigma0, N=1, gamma=self.gamma, f=self.f, n_s=self.n_s)


AmplifierParams = Union[PiaParams, PnaParams, LaserRunParams, QjumpRunParams]

PARAMS_BY_KIND = {
    AmplifierKind.PIA: PiaParams,
    AmplifierKind.PNA: PnaParams,
    AmplifierKind.LASER_FPE: LaserRunParams,
    AmplifierKind.QJUMP: QjumpRunParams,
}


@dataclass(frozen=True)
class InputSpec:
    """Bit "1" state; bit "0" is always the vacuum."""
    kind: InputKind
    alpha: Optional[float] = None
    m: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", InputKind(self.kind))
        if self.kind is InputKind.COHERENT:
            if self.alpha is None or not self.alpha > 0:
                raise ValueError(f"a coherent input needs alpha > 0, got {self.alpha}")
            if self.m is not None:
                raise ValueError("a coherent input takes alpha, not m")
        else:
            if self.m is None or int(self.m) != self.m or self.m < 1:
                raise ValueError(f"a Fock input needs an integer m >= 1, got {self.m}")
            if self.alpha is not None:
                raise ValueError("a Fock input takes m, not alpha")
            object.__setattr__(self, "m", int(self.m))

    @property
    def mean_photons(self) -> float:
        return self.alpha ** 2 if self.kind is InputKind.COHERENT else float(self.m)

    @property
    def photon_variance(self) -> float:
        return self.alpha ** 2 if self.kind is InputKind.COHERENT else 0.0

    def moments(self) -> MomentSet:
        if self.kind is InputKind.COHERENT:
            return coherent_moments(self.alpha)
        return fock_moments(self.m)


@dataclass(frozen=True)
class EnsembleSpec:
    seed: int
    count: int = 20000
    dt: Optional[float] = None
    n_traj: int = 64

    def __post_init__(self):
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")
        if self.count < 1 or self.n_traj < 1:
            raise ValueError("count and n_traj must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class AnalysisSpec:
    n_max: Optional[int] = None
    strictness: float = 10.0

    def __post_init__(self):
        if self.n_max is not None and self.n_max < 1:
            raise ValueError(f"n_max must be positive, got {self.n_max}")
        if not math.isfinite(self.strictness) or self.strictness <= 0:
            raise ValueError(f"strictness must be positive, got {self.strictness}")


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "results"
    write_timings: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    amplifier: AmplifierKind
    params: AmplifierParams
    input: InputSpec
    ensemble: EnsembleSpec
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self):
        if isinstance(self.amplifier, str):
            object.__setattr__(self, "amplifier", AmplifierKind(self.amplifier))
        expected = PARAMS_BY_KIND[self.amplifier]
        if not isinstance(self.params, expected):
            raise ValueError(f"{self.amplifier.value} needs {expected.__name__}, got {type(self.params).__name__}")
        # Fock states have no Gaussian Wigner sampler
        if self.input.kind is InputKind.FOCK and self.amplifier is AmplifierKind.LASER_FPE:
            raise ValueError("laser_fpe takes coherent inputs only")
