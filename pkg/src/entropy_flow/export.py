"""CSV and JSON serialization of densities, fields and trajectories.

Floats are written with ``repr`` so every file reads back to the exact same
binary values.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .density import DEFAULT_FLOOR, DensityField, ScalarField, project_mass
from .diagnostics import CSV_COLUMNS
from .grid import Grid, build_uniform_grid


def _fmt(x: float) -> str:
    return repr(float(x))


def write_field_csv(path, grid: Grid, values, column: str = "p") -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["r", column])
        for r, v in zip(grid.nodes, values):
            writer.writerow([_fmt(r), _fmt(v)])


def write_density_csv(path, p: DensityField) -> None:
    write_field_csv(path, p.grid, p.values, "p")


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return the ``(r, value)`` columns of a two-column CSV with a header row."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise ValueError(f"{path}: expected a two-column header row")
        rows = [(float(a), float(b)) for a, b in (row for row in reader if row)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    return data[:, 0], data[:, 1]


def _check_nodes(path, grid: Grid, r: np.ndarray) -> None:
    if r.size != grid.n:
        raise ValueError(f"{path}: {r.size} rows but the grid has {grid.n} nodes")
    tol = 1e-9 * grid.measure
    if np.max(np.abs(r - grid.nodes)) > tol:
        raise ValueError(f"{path}: node coordinates do not match the grid")


def grid_from_nodes(r: np.ndarray) -> Grid:
    """Recover the uniform midpoint grid whose nodes are ``r``."""
    n = r.size
    if n == 1:
        raise ValueError("cannot infer the carrier from a single node")
    h = (r[-1] - r[0]) / (n - 1)
    return build_uniform_grid(r[0] - h / 2, r[-1] + h / 2, n)


def read_density_csv(path, grid: Grid | None = None, floor: float = DEFAULT_FLOOR) -> DensityField:
    r, p = read_field_csv(path)
    if grid is None:
        grid = grid_from_nodes(r)
    _check_nodes(path, grid, r)
    return project_mass(ScalarField(grid, p), floor=floor)


def read_scalar_csv(path, grid: Grid) -> np.ndarray:
    r, v = read_field_csv(path)
    _check_nodes(path, grid, r)
    return v


def density_to_json(p: DensityField) -> dict:
    a, b = p.grid.bounds
    return {"bounds": [a, b], "n": p.grid.n, "values": [float(x) for x in p.values]}


def density_from_json(obj: dict, floor: float = DEFAULT_FLOOR) -> DensityField:
    a, b = obj["bounds"]
    grid = build_uniform_grid(a, b, int(obj["n"]))
    return project_mass(ScalarField(grid, obj["values"]), floor=floor)


def write_trajectory_csv(path, records) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(x) for x in rec.as_row()])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_json_safe(obj), indent=2) + "\n")
