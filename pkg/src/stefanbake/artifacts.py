"""Run artifacts on disk.

An artifact is a directory with three files:

``config.toml``
    resolved configuration snapshot (initial data inlined), enough to rebuild
    the run without the original config file;
``series.csv``
    first line ``# stefanbake-series <version>``, then a header with the
    columns of :data:`SERIES_COLUMNS` and one row per accepted step.  Floats are
    written with 17 significant digits, so identical runs give identical bytes;
``summary.json``
    schema version, config hash, termination report, wall time, step counts,
    long-time hypothesis flags, grid spacing and the certification digest.

Files are written into a temporary sibling directory that is renamed into
place at the end, so a failed run leaves nothing behind.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import MalformedArtifactError, SchemaVersionError
from .front import SERIES_COLUMNS, TimeSeries

SERIES_SCHEMA = 1
SUMMARY_SCHEMA = 1
SERIES_MAGIC = "# stefanbake-series"
INT_COLUMNS = ("step", "picard_iterations", "newton_iterations")

CONFIG_FILE = "config.toml"
SERIES_FILE = "series.csv"
SUMMARY_FILE = "summary.json"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def series_to_csv(series) -> str:
    lines = [f"{SERIES_MAGIC} {SERIES_SCHEMA}", ",".join(SERIES_COLUMNS)]
    cols = [series[name] for name in SERIES_COLUMNS]
    n = len(cols[0])
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    return "\n".join(lines) + "\n"


def series_from_csv(text: str) -> TimeSeries:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(SERIES_MAGIC):
        raise MalformedArtifactError("series.csv does not start with the stefanbake header line")
    try:
        version = int(lines[0][len(SERIES_MAGIC):].strip())
    except ValueError:
        raise MalformedArtifactError(f"unreadable series version line: {lines[0]!r}") from None
    if version != SERIES_SCHEMA:
        raise SchemaVersionError(
            f"series.csv has schema {version}, this build reads {SERIES_SCHEMA}; re-run the config to regenerate"
        )
    if len(lines) < 2:
        raise MalformedArtifactError("series.csv has no column header")
    header = lines[1].split(",")
    missing = [c for c in SERIES_COLUMNS if c not in header]
    if missing:
        raise MalformedArtifactError(f"series.csv is missing columns {missing}")
    rows = [ln.split(",") for ln in lines[2:] if ln]
    if any(len(r) != len(header) for r in rows):
        raise MalformedArtifactError("series.csv has ragged rows")
    out = TimeSeries()
    for j, name in enumerate(header):
        dtype = int if name in INT_COLUMNS else float
        try:
            out[name] = np.array([dtype(r[j]) for r in rows], dtype=dtype)
        except ValueError as exc:
            raise MalformedArtifactError(f"series.csv column {name!r}: {exc}") from None
    return out


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_json_safe(obj), sort_keys=True, indent=2) + "\n"


def digest(obj) -> str:
    text = json.dumps(_json_safe(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Artifact:
    path: Path
    series: TimeSeries
    summary: dict
    config: dict

    @property
    def classification(self) -> str:
        return self.summary["report"]["classification"]


def write_artifact(out_dir, config_data: dict, series, summary: dict) -> Path:
    """Write the three files atomically into ``out_dir`` (replaced if it exists)."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    summary = dict(summary)
    summary["schema_version"] = SUMMARY_SCHEMA
    summary["series_schema"] = SERIES_SCHEMA
    summary["config_hash"] = cfgmod.config_hash(config_data)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        (tmp / CONFIG_FILE).write_text(cfgmod.dumps(config_data))
        (tmp / SERIES_FILE).write_text(series_to_csv(series))
        (tmp / SUMMARY_FILE).write_text(dumps_json(summary))
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out_dir


def read_artifact(path) -> Artifact:
    path = Path(path)
    if not path.is_dir():
        raise MalformedArtifactError(f"{path} is not an artifact directory")
    for name in (CONFIG_FILE, SERIES_FILE, SUMMARY_FILE):
        if not (path / name).is_file():
            raise MalformedArtifactError(f"{path} is missing {name}")
    try:
        summary = json.loads((path / SUMMARY_FILE).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedArtifactError(f"summary.json: {exc}") from None
    version = summary.get("schema_version")
    if version != SUMMARY_SCHEMA:
        raise SchemaVersionError(
            f"summary.json has schema {version!r}, this build reads {SUMMARY_SCHEMA}; re-run the config to regenerate"
        )
    for key in ("report", "config_hash", "hypotheses", "dy"):
        if key not in summary:
            raise MalformedArtifactError(f"summary.json is missing {key!r}")
    series = series_from_csv((path / SERIES_FILE).read_text())
    config = cfgmod.load(path / CONFIG_FILE)
    if cfgmod.config_hash(config) != summary["config_hash"]:
        raise MalformedArtifactError("config snapshot does not match the hash recorded in summary.json")
    return Artifact(path, series, summary, config)
