"""Profile files and deterministic JSON.

A profile is stored as a CSV of ``r, u, du, lap, dlap`` (17 significant
digits, which round-trips every double) next to a JSON sidecar holding the
parameters, the classification and the solver statistics.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
import os
from pathlib import Path
from typing import Any, Iterable, Optional, Union

import numpy as np

from .radial import Classification, IntegrationStats, ProblemParams, RadialProfile

PathLike = Union[str, os.PathLike]

PROFILE_COLUMNS = ("r", "u", "du", "lap", "dlap")
FLOAT_FORMAT = "%.17g"


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars, arrays, tuples, enums and dataclasses to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return to_jsonable(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON text with sorted keys and shortest round-trip floats."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: PathLike, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps(obj), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- columns --------------------------------------------------------------------------


def write_columns(path: PathLike, columns: dict) -> Path:
    """Write equal-length float columns as CSV at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        np.savetxt(fh, data, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(names), comments="")
    return path


def read_columns(path: PathLike) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(header)))
    return {name: data[:, i].copy() for i, name in enumerate(header)}


# -- profiles -------------------------------------------------------------------------


def sidecar_path(csv_path: PathLike) -> Path:
    return Path(csv_path).with_suffix(".json")


def profile_metadata(profile: RadialProfile) -> dict:
    c = profile.classification
    return {
        "params": profile.params.to_dict(),
        "classification": {"kind": c.kind, "radius": c.radius, "reason": c.reason},
        "stats": profile.stats.to_dict(),
        "n_samples": len(profile),
    }


def write_profile(path: PathLike, profile: RadialProfile, extra: Optional[dict] = None) -> Path:
    """Write the CSV and its ``.json`` sidecar; returns the CSV path."""
    path = Path(path)
    write_columns(path, dict(zip(PROFILE_COLUMNS, (profile.r, profile.u, profile.p, profile.v, profile.q))))
    meta = profile_metadata(profile)
    if extra:
        meta["extra"] = extra
    write_json(sidecar_path(path), meta)
    return path


def read_profile(path: PathLike) -> RadialProfile:
    path = Path(path)
    cols = read_columns(path)
    missing = [c for c in PROFILE_COLUMNS if c not in cols]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    meta = read_json(sidecar_path(path))
    c = meta["classification"]
    return RadialProfile(
        ProblemParams(**meta["params"]),
        *(cols[k] for k in PROFILE_COLUMNS),
        Classification(c["kind"], c["radius"], c["reason"]),
        IntegrationStats(**meta["stats"]),
    )


def jsonl_append(path: PathLike, records: Iterable[Any]) -> None:
    """Append one canonical JSON object per line and flush to disk."""
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(to_jsonable(rec), sort_keys=True) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def jsonl_read(path: PathLike) -> list:
    """Read JSON lines, ignoring a trailing partial line left by an interrupted writer."""
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            break
    return out


def jsonl_repair(path: PathLike) -> int:
    """Cut the file back to its last complete JSON line; returns the bytes removed."""
    path = Path(path)
    if not path.exists():
        return 0
    data = path.read_bytes()
    keep = 0
    for line in data.splitlines(keepends=True):
        if not line.endswith(b"\n"):
            break
        try:
            if line.strip():
                json.loads(line)
        except json.JSONDecodeError:
            break
        keep += len(line)
    if keep < len(data):
        with open(path, "r+b") as fh:
            fh.truncate(keep)
            fh.flush()
            os.fsync(fh.fileno())
    return len(data) - keep


def finite_or_none(x: Optional[float]) -> Optional[float]:
    return None if x is None or not math.isfinite(x) else float(x)
