"""CSV/JSON writers with locale-free, round-trip float formatting."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    cols = list(zip(*rows)) if rows else [[] for _ in header]
    return {name: np.array([float(v) for v in col]) for name, col in zip(header, cols)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def state_header(m: int) -> list[str]:
    return [f"x{i}" for i in range(1, m + 1)] + ["y"]


def write_trajectory(path, traj) -> Path:
    """One row per event: ``t,event_index,particle,u,x1,...,xm,y`` (post-event state)."""
    header = ["t", "event_index", "particle", "u"] + state_header(traj.params.m)
    rows = (
        [traj.times[k], k + 1, int(traj.particles[k]) + 1, traj.us[k], *traj.states[k]]
        for k in range(traj.n_events)
    )
    return write_csv(path, header, rows)


def write_ensemble(path, sample_times, states, labels=None) -> Path:
    """Long format ``t,trajectory_id,<coordinates>`` from a ``(n, n_times, d)`` array."""
    n, n_times, d = states.shape
    if labels is None:
        labels = state_header(d - 1)
    header = ["t", "trajectory_id"] + list(labels)
    rows = (
        [sample_times[j], k, *states[k, j]]
        for j in range(n_times)
        for k in range(n)
    )
    return write_csv(path, header, rows)
