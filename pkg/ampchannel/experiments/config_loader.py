# config_loader.py

import dataclasses
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict

import yaml

from .config_models import (
    PARAMS_BY_KIND,
    AmplifierKind,
    AnalysisSpec,
    EnsembleSpec,
    ExperimentConfig,
    InputSpec,
    OutputSpec,
)

CONFIGS_DIR = Path(__file__).parent / "configs"


class ConfigError(ValueError):
    """Invalid experiment config; the message starts with the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _load_raw(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    if path.suffix.lower() in {".yaml", ".yml"}:
        return yaml.safe_load(path.read_text(encoding="utf-8"))
    raise ValueError(f"Unsupported config file extension: {path.suffix}")


def _build(cls, raw: Any, path: str):
    """Construct dataclass cls from a mapping, reporting errors by key path."""
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected a mapping, got {type(raw).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in fields:
            raise ConfigError(f"{path}.{key}", "unknown key")
    for name, f in fields.items():
        required = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if required and name not in raw:
            raise ConfigError(f"{path}.{name}", "required")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_config(raw: Dict[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    known = {"name", "amplifier", "input", "ensemble", "analysis", "output"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown key")
    for key in ("name", "amplifier", "input", "ensemble"):
        if key not in raw:
            raise ConfigError(key, "required")

    amplifier = raw["amplifier"]
    if not isinstance(amplifier, dict) or "kind" not in amplifier:
        raise ConfigError("amplifier.kind", "required")
    try:
        kind = AmplifierKind(amplifier["kind"])
    except ValueError as exc:
        choices = ", ".join(k.value for k in AmplifierKind)
        raise ConfigError("amplifier.kind", f"expected one of {choices}") from exc
    if "params" not in amplifier:
        raise ConfigError("amplifier.params", "required")

    params = _build(PARAMS_BY_KIND[kind], amplifier["params"], "amplifier.params")
    try:
        return ExperimentConfig(
            name=str(raw["name"]),
            amplifier=kind,
            params=params,
            input=_build(InputSpec, raw["input"], "input"),
            ensemble=_build(EnsembleSpec, raw["ensemble"], "ensemble"),
            analysis=_build(AnalysisSpec, raw.get("analysis", {}), "analysis"),
            output=_build(OutputSpec, raw.get("output", {}), "output"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<root>", str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    # A bare name resolves against the shipped configs
    if not path.is_absolute() and not path.suffix:
        for ext in ['.json', '.yaml', '.yml']:
            candidate = CONFIGS_DIR / f"{path}{ext}"
            if candidate.exists():
                path = candidate
                break
        else:
            path = CONFIGS_DIR / path
    return parse_config(_load_raw(path))


def config_to_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Plain mapping that parse_config turns back into cfg."""
    def plain(value):
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, dict):
            return {k: plain(v) for k, v in value.items()}
        return value

    return {
        "name": cfg.name,
        "amplifier": {"kind": cfg.amplifier.value, "params": plain(dataclasses.asdict(cfg.params))},
        "input": {k: v for k, v in plain(dataclasses.asdict(cfg.input)).items() if v is not None},
        "ensemble": plain(dataclasses.asdict(cfg.ensemble)),
        "analysis": plain(dataclasses.asdict(cfg.analysis)),
        "output": plain(dataclasses.asdict(cfg.output)),
    }
