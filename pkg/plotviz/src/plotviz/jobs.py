"""Plot job files: a small JSON schema naming inputs, kind, and output.

Paths inside a job are resolved relative to the job file so a directory of
artifacts plus a job file moves as a unit.  Unknown keys are rejected, same
as the simulator configs, so typos surface instead of silently defaulting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

__all__ = ["JobError", "PlotJob", "load_job"]

KIND_INPUTS = {
    "phase_sets": ("bcbf", "gb-linear", "gb-timeopt"),
    "quad_panels": ("bcbf", "gb", "agb"),
}
_ALLOWED_KEYS = {"kind", "inputs", "out", "trajectories", "title", "xlim", "ylim"}


class JobError(ValueError):
    """The job file is malformed or references missing inputs."""


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: dict
    out: Path
    trajectories: tuple = ()
    title: Optional[str] = None
    xlim: Optional[tuple] = None
    ylim: Optional[tuple] = None


def _limits(payload, key):
    if key not in payload:
        return None
    value = payload[key]
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in value)
            or not value[0] < value[1]):
        raise JobError(f"'{key}' must be two increasing numbers")
    return (float(value[0]), float(value[1]))


def _input_path(base: Path, value) -> Path:
    if not isinstance(value, str) or not value:
        raise JobError(f"input paths must be non-empty strings, got {value!r}")
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise JobError(f"input file not found: {path}")
    return path


def load_job(path) -> PlotJob:
    path = Path(path)
    if not path.is_file():
        raise JobError(f"job file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise JobError(f"job file is not valid JSON: {err}") from None
    if not isinstance(payload, dict):
        raise JobError("job file must be a JSON object at the top level")

    unknown = sorted(set(payload) - _ALLOWED_KEYS)
    if unknown:
        raise JobError(f"unknown job keys: {', '.join(unknown)}")
    for key in ("kind", "inputs", "out"):
        if key not in payload:
            raise JobError(f"job file is missing the '{key}' key")

    kind = payload["kind"]
    if kind not in KIND_INPUTS:
        raise JobError(f"unknown plot kind {kind!r}, "
                       f"pick from {sorted(KIND_INPUTS)}")
    required = KIND_INPUTS[kind]
    raw_inputs = payload["inputs"]
    if not isinstance(raw_inputs, dict):
        raise JobError("'inputs' must be an object mapping names to CSV paths")
    missing = [k for k in required if k not in raw_inputs]
    if missing:
        raise JobError(f"'inputs' for {kind} is missing "
                       f"{', '.join(repr(k) for k in missing)}")
    extra = sorted(set(raw_inputs) - set(required))
    if extra:
        raise JobError(f"unknown input names for {kind}: {', '.join(extra)}")

    base = path.parent
    inputs = {k: _input_path(base, raw_inputs[k]) for k in required}

    trajectories = payload.get("trajectories", [])
    if trajectories and kind != "phase_sets":
        raise JobError("'trajectories' overlays apply to phase_sets jobs only")
    if not isinstance(trajectories, list):
        raise JobError("'trajectories' must be a list of CSV paths")
    overlay = tuple(_input_path(base, p) for p in trajectories)

    title = payload.get("title")
    if title is not None and not isinstance(title, str):
        raise JobError("'title' must be a string")

    out = payload.get("out")
    if not isinstance(out, str) or not out:
        raise JobError("'out' must be a non-empty path string")
    out_path = Path(out)
    if not out_path.is_absolute():
        out_path = base / out_path

    return PlotJob(kind=kind, inputs=inputs, out=out_path, trajectories=overlay,
                   title=title, xlim=_limits(payload, "xlim"),
                   ylim=_limits(payload, "ylim"))
