"""Series files, config documents and report output.

Series files come in two flavours:

* CSV (default): ``# dt=<value>`` and ``# label=<text>`` comment lines, then one
  sample per line written with ``repr`` so every double round-trips exactly.
* Binary (``.bin``): the 8-byte magic ``AVGERRS1``, the sampling interval as a
  little-endian float64, then the samples as little-endian float64.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .ar import PRESETS, ArModel
from .errors import InvalidInputError
from .series import TimeSeries

__all__ = ["BINARY_MAGIC", "write_series", "read_series", "file_digest", "atomic_write_text",
           "atomic_write_bytes", "parse_config_text", "read_config", "ar_model_to_text",
           "ar_model_from_config", "dumps_json"]

BINARY_MAGIC = b"AVGERRS1"
_HEADER = struct.Struct("<8sd")


def atomic_write_bytes(path, data: bytes):
    """Write ``data`` to a temporary file in the target directory, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _is_binary_path(path) -> bool:
    return Path(path).suffix.lower() == ".bin"


def series_to_csv(series: TimeSeries) -> str:
    lines = [f"# dt={series.sampling_interval!r}"]
    if series.label:
        lines.append(f"# label={series.label}")
    lines.extend(repr(float(v)) for v in series.samples)
    return "\n".join(lines) + "\n"


def write_series(path, series: TimeSeries, binary=None):
    """Write ``series`` atomically; ``binary=None`` picks the format from the suffix."""
    if binary is None:
        binary = _is_binary_path(path)
    if binary:
        payload = _HEADER.pack(BINARY_MAGIC, series.sampling_interval)
        payload += np.asarray(series.samples, dtype="<f8").tobytes()
        atomic_write_bytes(path, payload)
    else:
        atomic_write_text(path, series_to_csv(series))


def _parse_csv(text: str, source) -> TimeSeries:
    dt, label = 1.0, None
    values = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if sep and key.strip() == "dt":
                dt = float(val)
            elif sep and key.strip() == "label":
                label = val.strip() or None
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise InvalidInputError(f"{source}:{lineno}: not a number: {line!r}") from None
    return TimeSeries(np.array(values, dtype=np.float64), dt, label)


def read_series(path) -> TimeSeries:
    """Read a CSV or binary series file (the format is detected from the content)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InvalidInputError(f"cannot read series file {path}: {exc}") from exc
    if data[:8] == BINARY_MAGIC:
        if len(data) < _HEADER.size or (len(data) - _HEADER.size) % 8:
            raise InvalidInputError(f"{path}: truncated binary series file")
        _, dt = _HEADER.unpack_from(data)
        samples = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
        series = TimeSeries(samples, dt)
    else:
        series = _parse_csv(data.decode("utf-8"), path)
    if len(series) < 1:
        raise InvalidInputError(f"{path}: series file has no samples")
    return series


def file_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_config_text(text: str) -> dict:
    """Parse a JSON object or ``key = value`` lines (``#`` starts a comment)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"invalid JSON config: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise InvalidInputError(f"config line {lineno}: expected key = value")
        out[key.strip()] = val.strip()
    return out


def read_config(path) -> dict:
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc


def ar_model_to_text(model: ArModel, seed=None) -> str:
    lines = [f"order = {model.order}",
             "coeffs = " + ", ".join(repr(c) for c in model.coeffs),
             f"noise_variance = {model.noise_variance!r}",
             f"mean = {model.mean!r}"]
    if seed is not None:
        lines.append(f"seed = {int(seed)}")
    return "\n".join(lines) + "\n"


def _float_list(value):
    if isinstance(value, str):
        return [float(v) for v in value.replace(",", " ").split()]
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(v) for v in value]


def ar_model_from_config(cfg: dict) -> ArModel:
    """Build an :class:`ArModel` from a parsed config (``preset`` or explicit fields)."""
    base = None
    if "preset" in cfg:
        try:
            base = PRESETS[str(cfg["preset"])]
        except KeyError:
            raise InvalidInputError(
                f"unknown AR preset {cfg['preset']!r}; choose from {sorted(PRESETS)}") from None
    try:
        coeffs = _float_list(cfg["coeffs"]) if "coeffs" in cfg else list(base.coeffs)
        noise = float(cfg["noise_variance"]) if "noise_variance" in cfg else base.noise_variance
        mean = float(cfg.get("mean", base.mean if base else 0.0))
    except (AttributeError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"incomplete or invalid AR config: {exc}") from exc
    if "order" in cfg and int(cfg["order"]) != len(coeffs):
        raise InvalidInputError(
            f"AR config order={cfg['order']} does not match {len(coeffs)} coefficients")
    return ArModel(coeffs=tuple(coeffs), noise_variance=noise, mean=mean)


def _check_finite(obj, where="report"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise InvalidInputError(f"non-finite value in {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _check_finite(v, where)


def dumps_json(obj) -> str:
    """Serialise with sorted keys and a trailing newline; rejects NaN and Inf."""
    _check_finite(obj)
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
