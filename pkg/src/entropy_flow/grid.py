"""Midpoint-rule discretization of a compact interval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidBounds, InvalidCount, LengthMismatch


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes and weights on the interval ``bounds``.

    ``measure`` is the total length of the carrier. Arrays are read-only so a
    grid can be shared between runs.
    """

    nodes: np.ndarray
    weights: np.ndarray
    bounds: tuple[float, float]

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        a, b = float(self.bounds[0]), float(self.bounds[1])
        if not a < b:
            raise InvalidBounds(f"need a < b, got ({a}, {b})")
        if nodes.ndim != 1 or nodes.size == 0:
            raise InvalidCount("grid needs at least one node")
        if weights.shape != nodes.shape:
            raise LengthMismatch(f"{weights.size} weights for {nodes.size} nodes")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if np.any(np.diff(nodes) <= 0) or nodes[0] < a or nodes[-1] > b:
            raise ValueError("nodes must be strictly increasing inside the bounds")
        if abs(weights.sum() - (b - a)) > 1e-12 * (b - a):
            raise ValueError("weights must sum to b - a")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bounds", (a, b))

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def measure(self) -> float:
        # b - a rather than sum(weights): exact for the uniform grid
        return self.bounds[1] - self.bounds[0]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self is other
            or (
                self.bounds == other.bounds
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.weights, other.weights)
            )
        )

    __hash__ = object.__hash__

    def __repr__(self):
        a, b = self.bounds
        return f"Grid(bounds=({a}, {b}), n={self.n})"


def build_uniform_grid(a: float, b: float, n: int) -> Grid:
    """Midpoint grid with ``n`` equal cells on ``[a, b]``."""
    a, b = float(a), float(b)
    if not np.isfinite(a) or not np.isfinite(b) or a >= b:
        raise InvalidBounds(f"need finite a < b, got ({a}, {b})")
    if int(n) != n or n < 1:
        raise InvalidCount(f"node count must be a positive integer, got {n}")
    n = int(n)
    h = (b - a) / n
    nodes = a + (np.arange(n) + 0.5) * h
    weights = np.full(n, h)
    return Grid(nodes, weights, (a, b))


def integrate(grid: Grid, f) -> float:
    """Weighted sum ``sum_i w_i f(r_i)``; ``f`` is an array or any field."""
    values = np.asarray(getattr(f, "values", f), dtype=float)
    if values.ndim == 0:
        values = np.full(grid.n, float(values))
    if values.shape != (grid.n,):
        raise LengthMismatch(f"field has {values.size} values, grid has {grid.n} nodes")
    return float(np.dot(grid.weights, values))
