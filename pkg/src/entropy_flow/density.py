"""Density and scalar fields on a grid, and the functionals built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllBelowFloor, GridMismatch, LengthMismatch, NonpositiveDensity
from .grid import Grid, integrate

DEFAULT_FLOOR = 1e-12
MASS_TOL = 1e-10
# project_mass leaves a density untouched when its mass is already this close to 1
_IDEMPOTENT_MASS_TOL = 1e-12


def _as_values(grid: Grid, values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(grid.n, float(arr))
    if arr.shape != (grid.n,):
        raise LengthMismatch(f"field has {arr.size} values, grid has {grid.n} nodes")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values, one per grid node, of unconstrained sign."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _as_values(self.grid, self.values)
        if not np.all(np.isfinite(values)):
            raise ValueError("scalar field has non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> ScalarField:
        return cls(grid, fn(grid.nodes))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _other_values(self, other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _other_values(self, other))

    def __mul__(self, k):
        return ScalarField(self.grid, self.values * float(k))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __repr__(self):
        return f"ScalarField({self.grid!r})"


def _other_values(field, other):
    if isinstance(other, (ScalarField, DensityField)):
        _check_same_grid(field, other)
        return other.values
    return float(other)


@dataclass(frozen=True, eq=False)
class DensityField:
    """A probability density on a grid: unit mass, every value at least ``floor``."""

    grid: Grid
    values: np.ndarray
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not self.floor > 0:
            raise ValueError(f"floor must be positive, got {self.floor}")
        values = _as_values(self.grid, self.values)
        if not np.all(np.isfinite(values)):
            raise NonpositiveDensity("density has non-finite values")
        if np.any(values <= 0):
            raise NonpositiveDensity("density has nonpositive values")
        if values.min() < self.floor:
            raise NonpositiveDensity(f"density value {values.min():.3e} below floor {self.floor:.1e}")
        mass = integrate(self.grid, values)
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"density mass is {mass!r}, expected 1")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, grid: Grid, values, floor: float = DEFAULT_FLOOR) -> DensityField:
        """Clip to ``floor`` and normalize arbitrary node values."""
        return project_mass(ScalarField(grid, values), floor=floor)

    @property
    def mass(self) -> float:
        return integrate(self.grid, self.values)

    def log(self) -> ScalarField:
        return ScalarField(self.grid, np.log(self.values))

    def energy(self, h) -> float:
        """Mean of ``h`` under this density."""
        h_values = getattr(h, "values", h)
        return integrate(self.grid, self.values * np.asarray(h_values, dtype=float))

    def __repr__(self):
        return f"DensityField({self.grid!r}, floor={self.floor:g})"


def _check_same_grid(f, g):
    if f.grid is not g.grid and f.grid != g.grid:
        raise GridMismatch(f"fields live on different grids: {f.grid!r} vs {g.grid!r}")


def differential_entropy(p: DensityField) -> float:
    """``-sum_i w_i p_i log p_i`` in nats."""
    values = np.asarray(p.values, dtype=float)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise NonpositiveDensity("entropy needs strictly positive finite density values")
    return -integrate(p.grid, values * np.log(values))


def scalar_product(f, g) -> float:
    """Quadrature inner product ``sum_i w_i f_i g_i``."""
    _check_same_grid(f, g)
    return integrate(f.grid, f.values * g.values)


def centered_bilinear(f, g) -> float:
    """``measure * <f, g> - (int f)(int g)``.

    Positive semidefinite, vanishing on constants: it is ``measure**2`` times
    the covariance of ``f`` and ``g`` under the uniform weighting.
    """
    _check_same_grid(f, g)
    grid = f.grid
    m = grid.measure
    # centering first avoids cancellation between the two terms
    fc = f.values - integrate(grid, f.values) / m
    gc = g.values - integrate(grid, g.values) / m
    return m * integrate(grid, fc * gc)


def project_mass(field, floor: float = DEFAULT_FLOOR) -> DensityField:
    """Clip values below ``floor`` up to ``floor``, then rescale to unit mass.

    A density that already satisfies both conditions is returned unchanged.
    """
    if isinstance(field, DensityField) and field.floor == floor:
        if abs(field.mass - 1.0) <= _IDEMPOTENT_MASS_TOL:
            return field
    grid = field.grid
    values = np.array(field.values, dtype=float)
    if values.shape != (grid.n,):
        raise LengthMismatch(f"field has {values.size} values, grid has {grid.n} nodes")
    if np.any(np.isnan(values)) or np.any(np.isinf(values)):
        raise NonpositiveDensity("cannot project a field with non-finite values")
    if not np.any(values > floor):
        raise AllBelowFloor(f"no value exceeds the floor {floor:g}")
    clipped = values < floor
    values[clipped] = floor
    mass = integrate(grid, values)
    if clipped.any() or abs(mass - 1.0) > _IDEMPOTENT_MASS_TOL:
        values /= mass
        # rescaling by a mass above 1 can push a clipped value back under the floor
        np.maximum(values, floor, out=values)
    return DensityField(grid, values, floor)

