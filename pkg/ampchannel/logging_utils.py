"""
Logging for ampchannel runs.

setup_logging() picks the handler once per process: structured JSON through
google-cloud-logging when the CLI runs as a Cloud Run job or service, plain
console lines otherwise.

@log_function wraps the long-running operations (ensemble evolution,
trajectory batches, experiment runs, output writers). Numerical arguments and
results are described by shape and headline numbers, never dumped.
"""

import dataclasses
import functools
import inspect
import logging
import os
import time
from typing import Any, Callable, List, Mapping

import numpy as np

logger = logging.getLogger(__name__)

# Cloud Run services set K_SERVICE, Cloud Run jobs set CLOUD_RUN_JOB
CLOUD_ENV_VARS = ("K_SERVICE", "CLOUD_RUN_JOB")

CONSOLE_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Headline attributes shown for results and dataclass arguments, in this order
HEADLINE_ATTRS = (
    "n_max", "count", "n_traj", "mean", "variance", "gain_db", "noise_figure_db",
    "ber", "mutual_information_bits", "distance", "passed", "identical",
)

MAX_TEXT = 120


def setup_logging(level: int = logging.INFO):
    """Install the log handler for this process.

    Cloud Run: google-cloud-logging's structured handler, so severities and
    source locations show up in Cloud Logging. Anywhere else: basicConfig.
    """
    if any(os.environ.get(name) for name in CLOUD_ENV_VARS):
        import google.cloud.logging
        client = google.cloud.logging.Client()
        client.setup_logging(log_level=level)
    else:
        logging.basicConfig(level=level, format=CONSOLE_FORMAT)


def _number(value: Any) -> str:
    if value is None:
        return "None"
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def _headline(value: Any) -> List[str]:
    parts = []
    for name in HEADLINE_ATTRS:
        try:
            attr = getattr(value, name)
        except Exception:
            continue
        if callable(attr) or not isinstance(attr, (bool, int, float, np.number)):
            continue
        parts.append(f"{name}={_number(attr)}")
    flags = getattr(value, "flags", None)
    if flags:
        parts.append(f"flags={len(flags)}")
    return parts


def _summarize(value: Any, max_len: int = MAX_TEXT) -> str:
    """One-line description of a value for the log."""
    if value is None or isinstance(value, (bool, int, float, complex, np.number)):
        return _number(value)
    if isinstance(value, np.ndarray):
        return f"ndarray{value.shape} {value.dtype}"
    if isinstance(value, str):
        return repr(value) if len(value) <= max_len else f"{value[:max_len]!r}... ({len(value)} chars)"
    if isinstance(value, Mapping):
        keys = ", ".join(str(k) for k in list(value)[:5])
        return f"{{{keys}{', ...' if len(value) > 5 else ''}}}"
    if isinstance(value, (list, tuple)):
        return f"{type(value).__name__}[{len(value)}]"

    name = type(value).__name__
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        shown = _headline(value) or [f.name for f in dataclasses.fields(value)][:6]
        return f"{name}({', '.join(shown)})"
    text = repr(value)
    return text if len(text) <= max_len else f"{text[:max_len]}... ({name})"


def _render_arg(value: Any) -> str:
    if isinstance(value, (np.ndarray, str)):
        return _summarize(value, max_len=80)
    if dataclasses.is_dataclass(value) and not isinstance(value, type) and _headline(value):
        return _summarize(value)
    return repr(value)


def _format_params(func: Callable, args: tuple, kwargs: dict) -> str:
    """name=value pairs for the call, defaults included."""
    bound = inspect.signature(func).bind(*args, **kwargs)
    bound.apply_defaults()
    return ", ".join(
        f"{name}={_render_arg(value)}"
        for name, value in bound.arguments.items()
        if name not in ("self", "cls")
    )


def log_function(func: Callable) -> Callable:
    """Log entry (▶), exit (◀) with a result summary and wall time, or failure.

    Failures are logged at ERROR with the exception type and re-raised.
    """
    qual_name = func.__qualname__

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            params = _format_params(func, args, kwargs)
        except Exception:
            params = "(unable to format params)"

        logger.info(f"▶ {qual_name}({params})")
        start = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as exc:
            elapsed = time.perf_counter() - start
            logger.error(f"◀ {qual_name} FAILED [{elapsed:.2f}s]: {type(exc).__name__}: {exc}")
            raise

        elapsed = time.perf_counter() - start
        logger.info(f"◀ {qual_name} → {_summarize(result)} [{elapsed:.2f}s]")
        return result

    return wrapper
