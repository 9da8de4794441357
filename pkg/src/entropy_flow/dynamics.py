"""Speed-gradient right-hand sides for the density evolution.

With only the mass constraint the flow is

    dp/dt = -gamma * (log p - mean(log p))

and with the additional energy constraint ``int p h = E``

    dp/dt = -gamma * log p + lambda1 * h + lambda2

where the multipliers keep both constraints stationary. Both laws can be
written as ``-gamma * (I - Psi) log p`` with ``Psi`` the weighted orthogonal
projection onto ``span{1}`` or ``span{1, h}``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .density import DEFAULT_FLOOR, DensityField, ScalarField, centered_bilinear, scalar_product
from .errors import DegenerateEnergy, GridMismatch, TargetOutOfRange
from .grid import Grid, integrate

DEGENERACY_TOL = 1e-10
STABILITY_CAP = 0.5


class Mode(str, enum.Enum):
    MASS_ONLY = "mass-only"
    MASS_ENERGY = "mass-energy"

    def __str__(self):
        return self.value


class StabilityWarning(UserWarning):
    """dt * gamma exceeds the explicit-stepping stability cap."""


@dataclass(frozen=True, eq=False)
class EnergyDensity:
    """Energy density ``h`` on the grid together with the target total energy."""

    grid: Grid
    values: np.ndarray
    target_energy: float

    def __post_init__(self):
        field = ScalarField(self.grid, self.values)
        object.__setattr__(self, "values", field.values)
        object.__setattr__(self, "target_energy", float(self.target_energy))

    @classmethod
    def from_function(cls, grid: Grid, fn, target_energy: float) -> EnergyDensity:
        return cls(grid, fn(grid.nodes), target_energy)

    @property
    def field(self) -> ScalarField:
        return ScalarField(self.grid, self.values)

    def centered(self) -> ScalarField:
        """``h - mean(h)``, orthogonal to constants in the quadrature product."""
        return ScalarField(self.grid, self.values - integrate(self.grid, self.values) / self.grid.measure)

    def spread(self) -> float:
        """``centered_bilinear(h, h)``, the denominator of both multipliers."""
        return centered_bilinear(self.field, self.field)

    def check_nondegenerate(self) -> float:
        spread = self.spread()
        scale = self.grid.measure**2 * float(np.max(np.abs(self.values))) ** 2
        if scale == 0.0 or spread <= DEGENERACY_TOL * scale:
            raise DegenerateEnergy("energy density is constant over the carrier")
        return spread

    def check_target(self, margin: float = 1e-9) -> None:
        lo, hi = float(self.values.min()), float(self.values.max())
        pad = margin * max(1.0, hi - lo)
        if not lo + pad < self.target_energy < hi - pad:
            raise TargetOutOfRange(
                f"target energy {self.target_energy} must lie strictly inside ({lo}, {hi})"
            )


@dataclass(frozen=True)
class SgParams:
    gamma: float = 1.0
    dt: float = 0.01
    floor: float = DEFAULT_FLOOR
    max_steps: int = 100_000
    stop_tol: float = 1e-9

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.floor > 0:
            raise ValueError(f"floor must be positive, got {self.floor}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        if self.dt * self.gamma > STABILITY_CAP:
            warnings.warn(
                f"dt*gamma = {self.dt * self.gamma:g} exceeds the stability cap {STABILITY_CAP}",
                StabilityWarning,
                stacklevel=3,
            )

    @property
    def over_stability_cap(self) -> bool:
        return self.dt * self.gamma > STABILITY_CAP


def _check_grid(p, h):
    if h is not None and p.grid is not h.grid and p.grid != h.grid:
        raise GridMismatch("density and energy density live on different grids")


def rhs_mass_only(p: DensityField, gamma: float) -> ScalarField:
    log_p = np.log(p.values)
    mean = integrate(p.grid, log_p) / p.grid.measure
    return ScalarField(p.grid, -gamma * (log_p - mean))


def lagrange_multipliers(p: DensityField, h: EnergyDensity, gamma: float) -> tuple[float, float]:
    """Multipliers (lambda1, lambda2) that keep mass and energy fixed."""
    _check_grid(p, h)
    denom = h.check_nondegenerate()
    grid = p.grid
    log_p = np.log(p.values)
    int_log = integrate(grid, log_p)
    int_h = integrate(grid, h.values)
    int_h2 = integrate(grid, h.values**2)
    int_log_h = integrate(grid, log_p * h.values)
    lam1 = gamma * (grid.measure * int_log_h - int_log * int_h) / denom
    lam2 = gamma * (int_log * int_h2 - int_h * int_log_h) / denom
    return lam1, lam2


def rhs_mass_energy(p: DensityField, h: EnergyDensity, gamma: float) -> ScalarField:
    lam1, lam2 = lagrange_multipliers(p, h, gamma)
    return ScalarField(p.grid, -gamma * np.log(p.values) + lam1 * h.values + lam2)


def apply_psi(f, mode: Mode | str, h: EnergyDensity | None = None) -> ScalarField:
    """Project ``f`` onto constants (mass-only) or onto ``span{1, h}``."""
    mode = Mode(mode)
    grid = f.grid
    out = np.full(grid.n, integrate(grid, f.values) / grid.measure)
    if mode is Mode.MASS_ENERGY:
        if h is None:
            raise ValueError("mass-energy mode needs an energy density")
        _check_grid(f, h)
        h.check_nondegenerate()
        ht = h.centered()
        out = out + ht.values * (scalar_product(ht, f) / scalar_product(ht, ht))
    return ScalarField(grid, out)


def rhs_operator_form(p: DensityField, mode: Mode | str, h: EnergyDensity | None, gamma: float) -> ScalarField:
    """``-gamma * (I - Psi) log p``."""
    log_p = p.log()
    return ScalarField(p.grid, -gamma * (log_p.values - apply_psi(log_p, mode, h).values))


def rhs(p: DensityField, mode: Mode | str, h: EnergyDensity | None, gamma: float) -> ScalarField:
    if Mode(mode) is Mode.MASS_ONLY:
        return rhs_mass_only(p, gamma)
    if h is None:
        raise ValueError("mass-energy mode needs an energy density")
    return rhs_mass_energy(p, h, gamma)
