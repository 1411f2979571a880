"""
Experiment orchestration: one binary-channel run per config, the matched-gain
laser/PIA comparison and the built-in figure checks.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..channel_report import ChannelReport, assemble_report, to_db
from ..laser_fpe import (
    LaserParams,
    ValidityReport,
    evolve_ensemble,
    linear_idler_photons,
    quoted_linear_gain,
    small_signal_gain,
    stationary_histogram,
    validity_check,
)
from ..logging_utils import log_function
from ..pia import (
    PiaParams,
    pia_fock_output,
    pia_output_variance,
    pia_thermal_idler_output,
    pna_output,
)
from ..qjump import (
    JointStateVector,
    build_generators,
    default_dt,
    qj_trajectories,
    stationary_number_dist,
)
from ..states import (
    PhotonDistribution,
    coherent_number_dist,
    default_n_max,
    fock_number_dist,
    moments_from_ensemble,
    number_hist_from_ensemble,
    thermal_moments,
    total_variation,
    total_variation_error,
    wigner_sample_coherent,
)
from ..streams import derive_seed
from .config_loader import load_config
from .config_models import AmplifierKind, ExperimentConfig, InputKind, PnaParams

logger = logging.getLogger(__name__)

BIT0, BIT1 = 0, 1
FIG2_PARAMS = LaserParams(C=30.0, sigma0=0.05, N=1, gamma=1.0, f=1.0, n_s=15.0)
FIG2_TOLERANCE = 0.05


class ExperimentError(RuntimeError):
    """A module error raised while running a named experiment."""


def _vacuum(n_max: int) -> PhotonDistribution:
    return fock_number_dist(0, n_max)


def _input_dist(cfg: ExperimentConfig, n_max: int) -> PhotonDistribution:
    if cfg.input.kind is InputKind.COHERENT:
        return coherent_number_dist(cfg.input.alpha ** 2, n_max)
    return fock_number_dist(cfg.input.m, n_max)


def resolve_n_max(cfg: ExperimentConfig) -> int:
    """Configured cutoff, or ceil(mean + 10σ) of the bit-"1" output under a linear estimate."""
    if cfg.analysis.n_max is not None:
        return cfg.analysis.n_max
    n_in, var_in = cfg.input.mean_photons, cfg.input.photon_variance
    if cfg.amplifier is AmplifierKind.PNA:
        g = cfg.params.gain_n
        return default_n_max(g * n_in, g * g * var_in)
    if cfg.amplifier is AmplifierKind.PIA:
        params = cfg.params
    else:
        laser = cfg.params.laser
        gain = max(small_signal_gain(laser, cfg.params.t), 1.0)
        params = PiaParams(gain_n=gain, idler_photons=linear_idler_photons(laser))
    mean = params.gain_n * n_in + params.thermal_photons
    variance = pia_output_variance(cfg.input.moments(), params, thermal_moments(params.idler_photons))
    return default_n_max(mean, variance)


# ── Per-amplifier channels ───────────────────────────────────────────

def _run_pia(cfg: ExperimentConfig, n_max: int, threads: int):
    params = cfg.params
    p0 = pia_thermal_idler_output(0.0, params, n_max)
    if cfg.input.kind is InputKind.COHERENT:
        p1 = pia_thermal_idler_output(cfg.input.alpha ** 2, params, n_max)
    else:
        p1 = pia_fock_output(cfg.input.m, params, n_max)
    extras = {"pia_gain_n": params.gain_n, "pia_idler_photons": params.idler_photons}
    return p0, p1, None, extras


def _run_pna(cfg: ExperimentConfig, n_max: int, threads: int):
    params: PnaParams = cfg.params
    source_cutoff = max(n_max // params.gain_n, 1)
    p1 = pna_output(_input_dist(cfg, source_cutoff), params.gain_n, n_max=n_max)
    return _vacuum(n_max), p1, None, {"pna_gain_n": params.gain_n}


def _run_laser(cfg: ExperimentConfig, n_max: int, threads: int):
    run = cfg.params
    laser = run.laser
    ens = cfg.ensemble
    validity = validity_check(laser, run.t, cfg.analysis.strictness)

    histograms, moments = [], []
    for bit, alpha in ((BIT0, 0.0), (BIT1, cfg.input.alpha)):
        seed = derive_seed(ens.seed, bit)
        initial = wigner_sample_coherent(alpha, laser.n_s, ens.count, seed, threads=threads)
        out = evolve_ensemble(initial, laser, run.t, dt=ens.dt, seed=seed, threads=threads,
                              strictness=cfg.analysis.strictness, allow_invalid=run.allow_invalid)
        histograms.append(number_hist_from_ensemble(out, n_max))
        moments.append(moments_from_ensemble(out))

    gain_ss = small_signal_gain(laser, run.t)
    moment_gain = (moments[1].mean_photons - moments[0].mean_photons) / cfg.input.mean_photons
    extras = {
        "small_signal_gain": gain_ss,
        "small_signal_gain_db": to_db(gain_ss),
        "quoted_linear_gain": quoted_linear_gain(laser, run.t),
        "moment_gain": moment_gain,
        "moment_gain_se": math.hypot(moments[0].mean_photons_se, moments[1].mean_photons_se) / cfg.input.mean_photons,
        "validity_override": bool(run.allow_invalid and not validity.passed),
    }
    return histograms[0], histograms[1], validity, extras


def _coherent_field(alpha: float, n_max: int) -> np.ndarray:
    return np.sqrt(coherent_number_dist(alpha ** 2, n_max).probs)


def _run_qjump(cfg: ExperimentConfig, n_max: int, threads: int):
    run = cfg.params
    laser = run.laser
    ens = cfg.ensemble
    ops = build_generators(laser, n_max)
    dt = ens.dt or default_dt(ops)

    if cfg.input.kind is InputKind.COHERENT:
        signal = JointStateVector.product(_coherent_field(cfg.input.alpha, n_max), excited=False)
    else:
        signal = JointStateVector.fock(cfg.input.m, n_max, excited=False)

    outputs = []
    for bit, initial in ((BIT0, JointStateVector.fock(0, n_max)), (BIT1, signal)):
        record = qj_trajectories(initial, ops, dt, run.t, ens.n_traj, derive_seed(ens.seed, bit),
                                 threads=threads, cutoff_tol=run.cutoff_tol)
        outputs.append(record.distribution_at(-1))
    extras = {"qjump_dt": dt, "qjump_channels": list(ops.labels)}
    return outputs[0], outputs[1], None, extras


CHANNELS = {
    AmplifierKind.PIA: _run_pia,
    AmplifierKind.PNA: _run_pna,
    AmplifierKind.LASER_FPE: _run_laser,
    AmplifierKind.QJUMP: _run_qjump,
}


# ── Experiments ──────────────────────────────────────────────────────

@log_function
def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ChannelReport:
    """Bit "0" (vacuum) and bit "1" through the configured channel, decided at the optimal threshold."""
    start = time.perf_counter()
    try:
        n_max = resolve_n_max(cfg)
        p0, p1, validity, extras = CHANNELS[cfg.amplifier](cfg, n_max, threads)
        report = assemble_report(cfg.amplifier.value, p0, p1, cfg.input.moments(), seed=cfg.ensemble.seed,
                                 validity=validity, extras=extras)
    except (ValueError, RuntimeError) as exc:
        raise ExperimentError(f"experiment {cfg.name!r} ({cfg.amplifier.value}): {exc}") from exc

    wall_time = time.perf_counter() - start
    logger.info(
        f"{cfg.name}: G={report.gain_linear:.4g} ({report.gain_db:.3f} dB), "
        f"R={report.noise_figure_linear:.4g}, B={report.ber:.4e}, I={report.mutual_information_bits:.6f} "
        f"[{wall_time:.2f}s]"
    )
    for flag in report.flags:
        logger.warning(f"{cfg.name}: {flag}")
    return dataclasses.replace(report, wall_time=wall_time)


def validate_config(cfg: ExperimentConfig) -> Optional[ValidityReport]:
    """Validity report of a laser config; PIA and PNA channels have no validity conditions."""
    if cfg.amplifier in (AmplifierKind.PIA, AmplifierKind.PNA):
        return None
    return validity_check(cfg.params.laser, cfg.params.t, cfg.analysis.strictness)


@dataclass(frozen=True, eq=False)
class MatchedGainComparison:
    laser: ChannelReport
    pia: ChannelReport
    pia_params: PiaParams

    def table(self) -> Dict[str, Dict[str, float]]:
        """{G, R, B, I} side by side."""
        def row(report: ChannelReport) -> Dict[str, float]:
            return {
                "gain_linear": report.gain_linear,
                "gain_db": report.gain_db,
                "noise_figure_linear": report.noise_figure_linear,
                "noise_figure_db": report.noise_figure_db,
                "ber": report.ber,
                "mutual_information_bits": report.mutual_information_bits,
            }

        return {"laser": row(self.laser), "pia": row(self.pia)}


@log_function
def compare_at_matched_gain(cfg_laser: ExperimentConfig, threads: int = 1,
                            idler_photons: float = 0.0) -> MatchedGainComparison:
    """Run the laser, then a PIA with its measured signal gain on the same input.

    idler_photons = 0 gives the ideal PIA; linear_idler_photons gives the
    linear-regime equivalent.
    """
    if cfg_laser.amplifier is not AmplifierKind.LASER_FPE:
        raise ExperimentError(f"experiment {cfg_laser.name!r}: matched-gain comparison needs a laser_fpe config")
    laser = run_experiment(cfg_laser, threads=threads)
    if laser.gain_linear < 1.0:
        raise ExperimentError(f"experiment {cfg_laser.name!r}: laser gain {laser.gain_linear:.4f} < 1, no PIA match")

    params = PiaParams(gain_n=laser.gain_linear, idler_photons=idler_photons)
    p0 = pia_thermal_idler_output(0.0, params, laser.n_max)
    p1 = pia_thermal_idler_output(cfg_laser.input.alpha ** 2, params, laser.n_max)
    pia = assemble_report("pia", p0, p1, cfg_laser.input.moments(), seed=cfg_laser.ensemble.seed,
                          extras={"pia_gain_n": params.gain_n, "pia_idler_photons": idler_photons})
    logger.info(
        f"matched gain {params.gain_n:.4f}: R laser {laser.noise_figure_linear:.4f} vs pia "
        f"{pia.noise_figure_linear:.4f}; B laser {laser.ber:.4e} vs pia {pia.ber:.4e}"
    )
    return MatchedGainComparison(laser=laser, pia=pia, pia_params=params)


def run_fig3_comparison(threads: int = 1, seed_override: Optional[int] = None) -> MatchedGainComparison:
    cfg = load_config("fig3_laser")
    if seed_override is not None:
        cfg = with_seed(cfg, seed_override)
    return compare_at_matched_gain(cfg, threads=threads)


@dataclass(frozen=True, eq=False)
class StationaryComparison:
    fpe: PhotonDistribution
    qjump: PhotonDistribution
    distance: float
    error: float
    seed: int

    @property
    def passed(self) -> bool:
        return self.distance <= FIG2_TOLERANCE + self.error


@log_function
def run_fig2_validation(seed: int = 2, threads: int = 1, n_max: int = 160, count: int = 16384,
                        n_traj: int = 32, burn_in: float = 10.0, t_avg: float = 20.0,
                        qj_dt: Optional[float] = None) -> StationaryComparison:
    """Stationary photon statistics of the one-atom laser: Fokker–Planck against quantum jumps."""
    p = FIG2_PARAMS
    try:
        fpe = stationary_histogram(p, n_max, burn_in, t_avg, count, seed=derive_seed(seed, 0),
                                   threads=threads)
        qj = stationary_number_dist(p, n_max, burn_in, t_avg, n_traj, derive_seed(seed, 1), dt=qj_dt,
                                    threads=threads)
    except (ValueError, RuntimeError) as exc:
        raise ExperimentError(f"fig2 validation: {exc}") from exc

    distance = total_variation(fpe.distribution, qj)
    error = total_variation_error(fpe.distribution, qj)
    logger.info(
        f"fig2: FPE mean {fpe.mean_photons:.3f} var {fpe.photon_variance:.3f}; "
        f"QJ mean {qj.mean:.3f} var {qj.variance:.3f}; TV {distance:.4f} (error {error:.4f})"
    )
    return StationaryComparison(fpe=fpe.distribution, qjump=qj, distance=distance, error=error, seed=seed)


# ── Batches and reruns ───────────────────────────────────────────────

def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return dataclasses.replace(cfg, ensemble=dataclasses.replace(cfg.ensemble, seed=seed))


def with_output(cfg: ExperimentConfig, directory: str | Path) -> ExperimentConfig:
    return dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, directory=str(directory)))


@log_function
def run_batch(paths: Sequence[str | Path], threads: int = 1, seed_override: Optional[int] = None,
              out_dir: Optional[str | Path] = None) -> List[Tuple[ExperimentConfig, ChannelReport, Dict[str, Path]]]:
    """Run and emit every config in order; each lands in its own directory under out_dir."""
    from .outputs import emit_outputs

    results = []
    for path in paths:
        cfg = load_config(path)
        if seed_override is not None:
            cfg = with_seed(cfg, seed_override)
        if out_dir is not None:
            cfg = with_output(cfg, Path(out_dir) / cfg.name)
        report = run_experiment(cfg, threads=threads)
        results.append((cfg, report, emit_outputs(report, cfg)))
    return results


@dataclass(frozen=True, eq=False)
class RerunResult:
    report: ChannelReport
    files: Dict[str, Path]
    mismatched: Tuple[str, ...]

    @property
    def identical(self) -> bool:
        return not self.mismatched


@log_function
def rerun_from_manifest(manifest_path: str | Path, out_dir: str | Path, threads: int = 1) -> RerunResult:
    """Re-run the config stored in a manifest and compare checksums of the emitted files."""
    from .config_loader import parse_config
    from .outputs import MANIFEST_NAME, emit_outputs

    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"Manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    cfg = with_output(parse_config(manifest["config"]), out_dir)
    report = run_experiment(cfg, threads=threads)
    files = emit_outputs(report, cfg)

    new_manifest = json.loads(files[MANIFEST_NAME].read_text(encoding="utf-8"))
    mismatched = tuple(
        name for name, entry in manifest["files"].items()
        if new_manifest["files"].get(name, {}).get("sha256") != entry["sha256"]
    )
    if new_manifest != manifest:
        mismatched += (MANIFEST_NAME,)
    for name in mismatched:
        logger.warning(f"rerun of {cfg.name}: {name} differs from the manifest")
    return RerunResult(report=report, files=files, mismatched=mismatched)
