"""
Run artifacts: a YAML report, one numeric histogram file per bit and a JSON
manifest with the config, versions and checksums.

Everything written here depends only on the config and seed, so a rerun
from the manifest reproduces the files byte for byte. Wall times are left
out unless the config asks for them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import scipy
import yaml

from .. import __version__
from ..channel_report import ChannelReport
from ..logging_utils import log_function
from ..states import PhotonDistribution
from .config_loader import config_to_dict
from .config_models import ExperimentConfig

logger = logging.getLogger(__name__)

REPORT_NAME = "report.yaml"
MANIFEST_NAME = "manifest.json"
HISTOGRAM_NAMES = ("hist_bit0.txt", "hist_bit1.txt")


def _plain(value: Any) -> Any:
    """YAML-safe Python scalars and containers."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def histogram_text(dist: PhotonDistribution) -> str:
    """Columns n, P(n), error; 17 significant digits, LF line endings."""
    errors = dist.errors if dist.errors is not None else np.zeros_like(dist.probs)
    table = np.column_stack([dist.n, dist.probs, errors])
    buffer = io.StringIO()
    np.savetxt(buffer, table, fmt=("%d", "%.17g", "%.17g"), header="n probability error", newline="\n")
    return buffer.getvalue()


def read_histogram(path: str | Path) -> PhotonDistribution:
    table = np.loadtxt(path, ndmin=2)
    return PhotonDistribution(probs=table[:, 1], errors=table[:, 2])


def report_dict(report: ChannelReport, name: str, write_timings: bool = False) -> Dict[str, Any]:
    """Report fields in a fixed order."""
    record: Dict[str, Any] = {
        "name": name,
        "amplifier": report.amplifier,
        "seed": report.seed,
        "n_max": report.n_max,
        "gain_linear": report.gain_linear,
        "gain_db": report.gain_db,
        "noise_figure_linear": report.noise_figure_linear,
        "noise_figure_db": report.noise_figure_db,
        "ber": report.ber,
        "mutual_information_bits": report.mutual_information_bits,
        "threshold": report.threshold,
        "q01": report.q01,
        "q10": report.q10,
        "snr_in": report.snr_in,
        "snr_out": report.snr_out,
        "noise_out": report.noise_out,
        "histograms": {"bit0": HISTOGRAM_NAMES[0], "bit1": HISTOGRAM_NAMES[1]},
    }
    if report.validity is not None:
        validity = report.validity
        record["validity"] = {
            "passed": validity.passed,
            "strictness": validity.strictness,
            "failures": validity.failures(),
            "margins": dict(validity.margins),
        }
    record["extras"] = dict(report.extras)
    record["flags"] = list(report.flags)
    if write_timings:
        record["wall_time"] = report.wall_time
    return _plain(record)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _versions() -> Dict[str, str]:
    return {
        "ampchannel": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _write(path: Path, text: str):
    # newline="\n" keeps LF endings on every platform
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def manifest_config(cfg: ExperimentConfig) -> Dict[str, Any]:
    """The config as stored in a manifest; the output directory is wherever the manifest lives."""
    record = config_to_dict(cfg)
    record["output"] = {k: v for k, v in record["output"].items() if k != "directory"}
    return record


@log_function
def emit_outputs(report: ChannelReport, cfg: ExperimentConfig,
                 directory: Optional[str | Path] = None, manifest: bool = True) -> Dict[str, Path]:
    """Write report, histograms and (unless manifest=False) the manifest; returns {file name: path}."""
    directory = Path(directory or cfg.output.directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc}") from exc

    files: Dict[str, Path] = {}
    for name, dist in zip(HISTOGRAM_NAMES, (report.p0, report.p1)):
        files[name] = directory / name
        _write(files[name], histogram_text(dist))

    files[REPORT_NAME] = directory / REPORT_NAME
    _write(files[REPORT_NAME], yaml.safe_dump(report_dict(report, cfg.name, cfg.output.write_timings),
                                               sort_keys=False, allow_unicode=True))

    if not manifest:
        return files
    record = {
        "config": manifest_config(cfg),
        "seed": cfg.ensemble.seed,
        "versions": _versions(),
        "files": {name: {"sha256": _sha256(path)} for name, path in sorted(files.items())},
    }
    files[MANIFEST_NAME] = directory / MANIFEST_NAME
    _write(files[MANIFEST_NAME], json.dumps(record, indent=2, sort_keys=True) + "\n")
    logger.info(f"wrote {len(files)} files to {directory}")
    return files


@log_function
def emit_comparison(comparison, directory: str | Path, cfg: ExperimentConfig) -> Dict[str, Path]:
    """Laser and matched PIA runs side by side, plus the {G, R, B, I} table."""
    directory = Path(directory)
    files = {}
    for label, report in (("laser", comparison.laser), ("pia", comparison.pia)):
        # only the laser run can be regenerated from a config
        sub_cfg = dataclasses.replace(cfg, name=f"{cfg.name}_{label}") if label == "pia" else cfg
        for name, path in emit_outputs(report, sub_cfg, directory / label, manifest=label == "laser").items():
            files[f"{label}/{name}"] = path
    table_path = directory / "comparison.yaml"
    _write(table_path, yaml.safe_dump(_plain(comparison.table()), sort_keys=False))
    files["comparison.yaml"] = table_path
    return files


@log_function
def emit_stationary(comparison, directory: str | Path) -> Dict[str, Path]:
    """Fokker–Planck and quantum-jump stationary histograms with their distance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        "hist_fpe.txt": directory / "hist_fpe.txt",
        "hist_qjump.txt": directory / "hist_qjump.txt",
        "stationary.yaml": directory / "stationary.yaml",
    }
    _write(files["hist_fpe.txt"], histogram_text(comparison.fpe))
    _write(files["hist_qjump.txt"], histogram_text(comparison.qjump))
    summary = {
        "seed": comparison.seed,
        "total_variation": comparison.distance,
        "combined_error": comparison.error,
        "passed": comparison.passed,
        "fpe": {"mean": comparison.fpe.mean, "variance": comparison.fpe.variance},
        "qjump": {"mean": comparison.qjump.mean, "variance": comparison.qjump.variance},
    }
    _write(files["stationary.yaml"], yaml.safe_dump(_plain(summary), sort_keys=False))
    return files


def rederive_from_files(directory: str | Path) -> Dict[str, float]:
    """B and I recomputed from the written histograms and threshold."""
    from ..infotheory import BinaryErrorPair, ber, binary_mutual_information

    directory = Path(directory)
    record = yaml.safe_load((directory / REPORT_NAME).read_text(encoding="utf-8"))
    p0 = read_histogram(directory / HISTOGRAM_NAMES[0])
    p1 = read_histogram(directory / HISTOGRAM_NAMES[1])
    theta = record["threshold"]
    errors = BinaryErrorPair(
        q01=float(np.clip(p1.probs[: theta + 1].sum(), 0.0, 1.0)),
        q10=float(np.clip(p0.probs[theta + 1:].sum(), 0.0, 1.0)),
    )
    return {"ber": ber(errors), "mutual_information_bits": binary_mutual_information(errors)}
