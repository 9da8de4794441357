"""Lyapunov and convergence diagnostics evaluated along trajectories."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .density import DensityField, ScalarField, centered_bilinear, differential_entropy, scalar_product
from .dynamics import EnergyDensity, Mode, apply_psi
from .errors import InvalidExponent, ZeroField
from .grid import integrate

CSV_COLUMNS = (
    "t",
    "S",
    "V",
    "vdot_analytic",
    "vdot_numeric",
    "mass_residual",
    "energy_residual",
    "dist_l2",
    "dist_linf",
    "angle",
    "gh_k2",
)


@dataclass
class TrajectoryRecord:
    t: float
    entropy: float
    lyapunov: float
    vdot_analytic: float
    vdot_numeric: float
    mass_residual: float
    energy_residual: float
    dist_l2: float
    dist_linf: float
    angle: float
    gh_moment_k2: float

    def as_row(self) -> tuple[float, ...]:
        """Values in ``CSV_COLUMNS`` order."""
        return astuple(self)


def lyapunov_value(p: DensityField, s_max: float) -> float:
    return s_max - differential_entropy(p)


def vdot_mass_only(p: DensityField, gamma: float) -> float:
    log_p = p.log()
    return -(gamma / p.grid.measure) * centered_bilinear(log_p, log_p)


def vdot_mass_energy(p: DensityField, h: EnergyDensity, gamma: float) -> float:
    spread = h.check_nondegenerate()
    log_p = p.log()
    cross = centered_bilinear(log_p, h.field)
    return (gamma / p.grid.measure) * (-centered_bilinear(log_p, log_p) + cross**2 / spread)


def angle_between(f, g) -> float:
    """Unsigned angle in ``[0, pi/2]`` between the lines spanned by ``f`` and ``g``."""
    nf = math.sqrt(scalar_product(f, f))
    ng = math.sqrt(scalar_product(g, g))
    if nf < 1e-14 or ng < 1e-14:
        raise ZeroField("angle undefined for a zero field")
    # atan2 of the orthogonal and parallel parts; arccos loses ~1e-8 near zero
    fv = np.asarray(getattr(f, "values", f), dtype=float)
    gv = np.asarray(getattr(g, "values", g), dtype=float)
    along = scalar_product(f, g) / ng
    w = f.grid.weights
    perp = fv - (along / ng) * gv
    return math.atan2(math.sqrt(float(w @ perp**2)), abs(along))


def alignment_angle(p: DensityField, reference: ScalarField) -> float:
    """Angle between ``log p`` and ``reference``."""
    return angle_between(p.log(), reference)


def gh_moment(p: DensityField, k: float = 2.0) -> float:
    """``sum_i w_i p_i |log p_i|**k``; bounded along converging runs when k > 1."""
    if not k > 1:
        raise InvalidExponent(f"exponent must exceed 1, got {k}")
    return integrate(p.grid, p.values * np.abs(np.log(p.values)) ** k)


def dist_l2(p, q) -> float:
    return math.sqrt(integrate(p.grid, (p.values - q.values) ** 2))


def dist_linf(p, q) -> float:
    return float(np.max(np.abs(p.values - q.values)))


def make_record(
    t: float,
    p: DensityField,
    limit: DensityField,
    s_max: float,
    mode: Mode | str,
    h: EnergyDensity | None,
    gamma: float,
    mass_residual: float,
    energy_residual: float = math.nan,
) -> TrajectoryRecord:
    mode = Mode(mode)
    entropy = differential_entropy(p)
    if mode is Mode.MASS_ONLY:
        vdot = vdot_mass_only(p, gamma)
    else:
        vdot = vdot_mass_energy(p, h, gamma)
    log_p = p.log()
    try:
        angle = angle_between(log_p, apply_psi(log_p, mode, h))
    except ZeroField:
        angle = math.nan
    return TrajectoryRecord(
        t=t,
        entropy=entropy,
        lyapunov=s_max - entropy,
        vdot_analytic=vdot,
        vdot_numeric=math.nan,
        mass_residual=mass_residual,
        energy_residual=energy_residual,
        dist_l2=dist_l2(p, limit),
        dist_linf=dist_linf(p, limit),
        angle=angle,
        gh_moment_k2=gh_moment(p, 2.0),
    )


def fill_vdot_numeric(records: list[TrajectoryRecord]) -> None:
    """Finite-difference dV/dt in place: central inside, 3-point one-sided at the ends."""
    n = len(records)
    if n < 2:
        return
    t = np.array([r.t for r in records])
    v = np.array([r.lyapunov for r in records])
    d = np.empty(n)
    if n == 2:
        d[:] = (v[1] - v[0]) / (t[1] - t[0])
    else:
        d[1:-1] = (v[2:] - v[:-2]) / (t[2:] - t[:-2])
        h0 = t[1] - t[0]
        h1 = t[-1] - t[-2]
        d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h0)
        d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h1)
    for rec, value in zip(records, d):
        rec.vdot_numeric = float(value)


def vdot_agrees(analytic: float, numeric: float) -> bool:
    """Finite-difference tolerance: ``max(1e-6, 1e-3 |analytic|)``."""
    return abs(analytic - numeric) <= max(1e-6, 1e-3 * abs(analytic))
