"""Config-file parsing and deterministic report writing for the CLI."""

from __future__ import annotations

import json
import math
import os
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .errors import UsageError, ValidationError
from .measures import (
    AtomicMeasure,
    DensityBoxMeasure,
    TargetMeasure,
    UniformBallMeasure,
    UniformBoxMeasure,
    atoms_measure,
)

DEFAULT_SEED = 20240801


def load_json_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return data


def load_cloud_csv(path, dim: Optional[int] = None):
    """One point per row, optional trailing weight column (detected against
    the declared dimension)."""
    try:
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    rows.append([float(c) for c in line.split(",")])
                except ValueError as exc:
                    raise UsageError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read cloud {path}: {exc}") from exc
    if not rows:
        raise UsageError(f"{path}: empty sample cloud")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise UsageError(f"{path}: rows have inconsistent column counts")
    data = np.asarray(rows)
    if dim is not None and width == dim + 1:
        points, weights = data[:, :dim], data[:, dim]
        weights = weights / weights.sum()
        return points, weights
    return data, None


def measure_from_config(block: dict, base_dir: str = ".") -> TargetMeasure:
    if not isinstance(block, dict) or "type" not in block:
        raise ValidationError("measure block must be a mapping with a 'type' key")
    kind = str(block["type"]).lower()
    if kind == "uniform_box":
        return UniformBoxMeasure(block["lo"], block["hi"])
    if kind == "uniform_ball":
        return UniformBallMeasure(block["center"], float(block["radius"]),
                                  cells_per_axis=block.get("cells_per_axis"))
    if kind == "cloud":
        dim = block.get("dim")
        points, weights = load_cloud_csv(os.path.join(base_dir, block["path"]), dim)
        return AtomicMeasure(points, weights)
    if kind == "atoms":
        return atoms_measure(block["positions"], block["weights"])
    if kind == "density":
        expr = block["expr"]
        lo = np.atleast_1d(np.asarray(block["lo"], dtype=float))
        code = compile(expr, "<density expr>", "eval")

        def density(points: np.ndarray) -> np.ndarray:
            env = {"np": np, "r": np.linalg.norm(points, axis=1)}
            for k in range(points.shape[1]):
                env[f"x{k}"] = points[:, k]
            return np.broadcast_to(
                np.asarray(eval(code, {"__builtins__": {}}, env), dtype=float),
                (points.shape[0],),
            )

        return DensityBoxMeasure(density, lo, block["hi"],
                                 cells_per_axis=block.get("cells_per_axis"),
                                 normalize=bool(block.get("normalize", False)))
    raise ValidationError(f"unknown measure type {kind!r}")


def _sanitize(obj):
    """JSON-safe copy: numpy scalars to python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if x == math.inf:
            return "inf"
        if x == -math.inf:
            return "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_report(payload: dict, path) -> None:
    """Deterministic JSON: the payload under 'result' is byte-stable across
    reruns; the timestamp lives in a separate metadata field."""
    doc = {
        "result": _sanitize(payload),
        "meta": {"written_at": datetime.now(timezone.utc).isoformat()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
