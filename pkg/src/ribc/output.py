"""CSV/JSON writers and readers for trajectories, control schedules and tables.

Floats are written with ``repr``, the shortest string that reads back to the
same double, so every file round-trips exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import EdgeSet


def _num(v) -> str:
    return repr(float(v))


def trajectory_rows(trial_id: int, trajectory) -> list[dict]:
    """Flatten ``[(t, opinions), ...]`` into one row per agent and time."""
    rows = []
    for t, x in trajectory:
        x = np.asarray(x)
        for agent, xi in enumerate(x):
            row = {"trial_id": int(trial_id), "t": int(t), "agent": agent}
            row.update({f"x_{k + 1}": float(v) for k, v in enumerate(xi)})
            rows.append(row)
    return rows


def _open(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_rows(rows: list[dict], path, fmt: str):
    """Write a homogeneous table; columns follow the first row's key order."""
    path = Path(path)
    with _open(path) as fh:
        if fmt == "json":
            json.dump(rows, fh, indent=1, default=_json_default)
            fh.write("\n")
            return
        if not rows:
            return
        w = csv.writer(fh, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for row in rows:
            w.writerow([_num(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def emit_trajectory(records, path, fmt: str = "csv"):
    """Write ``(trial_id, trajectory)`` pairs; columns ``trial_id,t,agent,x_1..x_d``."""
    rows = []
    for trial_id, trajectory in records:
        rows.extend(trajectory_rows(trial_id, trajectory))
    if not rows:
        raise ValueError("no trajectory data to write")
    write_rows(rows, path, fmt)


def read_trajectory(path) -> dict[int, list[tuple[int, np.ndarray]]]:
    """Inverse of :func:`emit_trajectory`, keyed by trial id."""
    path = Path(path)
    if path.suffix == ".json":
        rows = json.loads(path.read_text())
    else:
        with open(path, newline="") as fh:
            rows = [
                {k: (float(v) if k.startswith("x_") else int(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)
            ]
    grouped: dict[int, dict[int, list]] = {}
    for row in rows:
        coords = [row[k] for k in sorted((k for k in row if k.startswith("x_")), key=lambda k: int(k[2:]))]
        grouped.setdefault(row["trial_id"], {}).setdefault(row["t"], []).append((row["agent"], coords))
    out = {}
    for trial, by_t in grouped.items():
        out[trial] = [
            (t, np.array([c for _, c in sorted(agents)])) for t, agents in sorted(by_t.items())
        ]
    return out


def emit_schedule(schedule: list[EdgeSet], path, fmt: str = "csv"):
    """One row per step with the canonical-order indices of the chosen edges."""
    if fmt == "json":
        rows = [{"t": t, "edges": e.indices()} for t, e in enumerate(schedule)]
    else:
        rows = [{"t": t, "edges": " ".join(map(str, e.indices()))} for t, e in enumerate(schedule)]
    if rows:
        write_rows(rows, path, fmt)
    else:
        with _open(Path(path)) as fh:
            fh.write("t,edges\n" if fmt == "csv" else "[]\n")


def read_schedule(path, n: int) -> list[EdgeSet]:
    path = Path(path)
    if path.suffix == ".json":
        rows = json.loads(path.read_text())
        return [EdgeSet.from_indices(n, r["edges"]) for r in rows]
    with open(path, newline="") as fh:
        return [EdgeSet.from_indices(n, [int(k) for k in r["edges"].split()]) for r in csv.DictReader(fh)]
