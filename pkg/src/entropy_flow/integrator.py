"""Explicit RK4 time stepping with re-projection onto the constraint set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import diagnostics
from .density import DensityField, ScalarField, differential_entropy, project_mass
from .dynamics import EnergyDensity, Mode, SgParams, rhs
from .errors import ProjectionInfeasible, StepInstability
from .grid import Grid, integrate
from .maxent import gibbs_solve, uniform_limit

MAX_SNAPSHOTS = 1000


def _stage_rhs(grid: Grid, values: np.ndarray, mode: Mode, h, gamma: float) -> np.ndarray:
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise StepInstability("intermediate stage left the positive cone; reduce dt")
    # stage states are not normalized densities, only their values are needed
    state = SimpleNamespace(grid=grid, values=values)
    return rhs(state, mode, h, gamma).values


def project_mass_energy(grid: Grid, values, h: EnergyDensity, floor: float) -> DensityField:
    """Restore mass 1 and energy E with an additive correction in ``span{1, h~}``.

    If the corrected field dips below ``floor`` the low values are clipped and
    the correction is solved once more on the clipped field.
    """
    hv = h.values
    ht = h.centered().values
    ones = np.ones(grid.n)
    matrix = np.array(
        [
            [integrate(grid, ones), integrate(grid, ht)],
            [integrate(grid, hv), integrate(grid, ht * hv)],
        ]
    )

    def correct(v):
        rhs_vec = np.array([1.0 - integrate(grid, v), h.target_energy - integrate(grid, v * hv)])
        alpha, beta = np.linalg.solve(matrix, rhs_vec)
        return v + alpha + beta * ht

    v = correct(np.array(values, dtype=float))
    if v.min() < floor:
        v = correct(np.maximum(v, floor))
        if v.min() < floor:
            shortfall = integrate(grid, np.maximum(floor - v, 0.0))
            if v.min() <= 0 or shortfall > 1e-10:
                raise ProjectionInfeasible(
                    f"energy {h.target_energy} cannot be restored without negative density"
                )
            v = np.maximum(v, floor)
    return DensityField(grid, v, floor)


def _residuals(grid: Grid, values: np.ndarray, mode: Mode, h) -> tuple[float, float]:
    mass = integrate(grid, values) - 1.0
    if mode is Mode.MASS_ONLY:
        return mass, math.nan
    return mass, integrate(grid, values * h.values) - h.target_energy


def _advance(p: DensityField, mode: Mode, h, params: SgParams, k1=None):
    grid, gamma, dt = p.grid, params.gamma, params.dt
    y = np.asarray(p.values)
    if k1 is None:
        k1 = _stage_rhs(grid, y, mode, h, gamma)
    k2 = _stage_rhs(grid, y + 0.5 * dt * k1, mode, h, gamma)
    k3 = _stage_rhs(grid, y + 0.5 * dt * k2, mode, h, gamma)
    k4 = _stage_rhs(grid, y + dt * k3, mode, h, gamma)
    raw = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(raw)):
        raise StepInstability("step produced non-finite values; reduce dt")
    residuals = _residuals(grid, raw, mode, h)
    if mode is Mode.MASS_ONLY:
        new = project_mass(ScalarField(grid, raw), floor=params.floor)
    else:
        new = project_mass_energy(grid, raw, h, params.floor)
    return new, residuals


def step(p: DensityField, mode: Mode | str, h: EnergyDensity | None, params: SgParams) -> DensityField:
    """One RK4 step of the speed-gradient flow followed by constraint re-projection."""
    mode = Mode(mode)
    if mode is Mode.MASS_ENERGY and h is None:
        raise ValueError("mass-energy mode needs an energy density")
    return _advance(p, mode, h, params)[0]


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[DensityField] = field(default_factory=list)
    state_steps: list[int] = field(default_factory=list)
    records: list[diagnostics.TrajectoryRecord] = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    final_rhs_inf: float = math.nan
    limit: DensityField | None = None
    mode: Mode = Mode.MASS_ONLY

    @property
    def final(self) -> DensityField:
        return self.states[-1]

    def summary(self) -> dict:
        final = self.final
        return {
            "mode": str(self.mode),
            "converged": self.converged,
            "steps": self.steps,
            "final_time": self.records[-1].t,
            "final_rhs_inf": self.final_rhs_inf,
            "final_entropy": differential_entropy(final),
            "limit_entropy": differential_entropy(self.limit),
            "final_dist_linf": diagnostics.dist_linf(final, self.limit),
            "final_state": {
                "bounds": list(final.grid.bounds),
                "n": final.grid.n,
                "values": [float(x) for x in final.values],
            },
        }


def default_stride(max_steps: int) -> int:
    return max(1, math.ceil((max_steps + 1) / MAX_SNAPSHOTS))


def run(
    p0: DensityField,
    mode: Mode | str,
    h: EnergyDensity | None,
    params: SgParams,
    limit: DensityField | None = None,
    stride: int | None = None,
) -> Trajectory:
    """Integrate until ``max|rhs| < stop_tol`` or ``max_steps`` steps.

    ``limit`` is the stationary density used for distances and the Lyapunov
    value; by default it comes from the MaxEnt solvers, never from the run.
    Reaching ``max_steps`` is reported through ``converged=False``.
    """
    mode = Mode(mode)
    grid = p0.grid
    if mode is Mode.MASS_ENERGY and h is None:
        raise ValueError("mass-energy mode needs an energy density")
    if limit is None:
        limit = uniform_limit(grid, params.floor) if mode is Mode.MASS_ONLY else gibbs_solve(grid, h, params.floor).density
    s_max = differential_entropy(limit)
    stride = stride or default_stride(params.max_steps)

    traj = Trajectory(limit=limit, mode=mode)
    p = p0
    t = 0.0
    residuals = _residuals(grid, np.asarray(p0.values), mode, h)
    k = 0
    while True:
        u = rhs(p, mode, h, params.gamma).values
        traj.records.append(
            diagnostics.make_record(t, p, limit, s_max, mode, h, params.gamma, *residuals)
        )
        rhs_inf = float(np.max(np.abs(u)))
        done = rhs_inf < params.stop_tol
        if done or k >= params.max_steps:
            traj.converged = done
            traj.final_rhs_inf = rhs_inf
            break
        if k % stride == 0:
            traj.times.append(t)
            traj.states.append(p)
            traj.state_steps.append(k)
        p, residuals = _advance(p, mode, h, params, k1=u)
        k += 1
        t = k * params.dt
    traj.times.append(t)
    traj.states.append(p)
    traj.state_steps.append(k)
    traj.steps = k
    diagnostics.fill_vdot_numeric(traj.records)
    return traj
