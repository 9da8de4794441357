"""Stationary maximum-entropy densities, computed without running the dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .density import DEFAULT_FLOOR, DensityField, ScalarField
from .dynamics import EnergyDensity
from .errors import InfeasibleConstraints, SingularHessian, TargetOutOfRange
from .grid import Grid

FEASIBILITY_MARGIN = 1e-9
MOMENT_TOL = 1e-8
MAX_NEWTON_ITER = 50


def uniform_limit(grid: Grid, floor: float = DEFAULT_FLOOR) -> DensityField:
    """The mass-only limit: constant density ``1 / measure``."""
    return DensityField(grid, np.full(grid.n, 1.0 / grid.measure), floor)


@dataclass(frozen=True)
class GibbsSolution:
    mu: float
    log_c: float
    density: DensityField

    @property
    def c(self) -> float:
        return math.exp(self.log_c)


def _log_partition(grid: Grid, exponent: np.ndarray) -> float:
    return float(logsumexp(exponent, b=grid.weights))


def _gibbs_energy(grid: Grid, h: np.ndarray, mu: float) -> tuple[float, float]:
    """Mean and variance of ``h`` under the normalized ``exp(-mu h)``."""
    a = -mu * h
    q = grid.weights * np.exp(a - a.max())
    q /= q.sum()
    mean = float(q @ h)
    var = float(q @ (h - mean) ** 2)
    return mean, var


def gibbs_solve(grid: Grid, h: EnergyDensity, floor: float = DEFAULT_FLOOR) -> GibbsSolution:
    """Find ``mu`` so that ``C exp(-mu h)`` has mean energy ``h.target_energy``.

    The mean energy is strictly decreasing in ``mu``, so the root is bracketed
    and bisected to 1e-6, then polished with Newton steps.
    """
    h.check_nondegenerate()
    h.check_target(FEASIBILITY_MARGIN)
    hv = np.asarray(h.values, dtype=float)
    target = h.target_energy
    scale = float(hv.max() - hv.min())

    def excess(mu):
        return _gibbs_energy(grid, hv, mu)[0] - target

    lo = hi = 0.0
    step = 1.0 / scale
    if excess(0.0) > 0:
        # mean energy too high: need mu > 0
        hi = step
        while excess(hi) > 0:
            lo, hi = hi, 2 * hi
            if hi * scale > 1e6:
                raise TargetOutOfRange(f"no Gibbs density reaches energy {target}")
    else:
        lo = -step
        while excess(lo) < 0:
            lo, hi = 2 * lo, lo
            if -lo * scale > 1e6:
                raise TargetOutOfRange(f"no Gibbs density reaches energy {target}")

    while (hi - lo) * scale > 1e-6:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid

    mu = 0.5 * (lo + hi)
    # the root may sit on a bracket end, so allow one bracket width of slack
    slack = hi - lo
    tol = 1e-10 * max(1.0, abs(target))
    for _ in range(20):
        mean, var = _gibbs_energy(grid, hv, mu)
        resid = mean - target
        if abs(resid) <= 1e-15 * max(1.0, abs(target)) or var == 0.0:
            break
        # d(mean)/d(mu) = -var
        new_mu = mu + resid / var
        if not lo - slack <= new_mu <= hi + slack:
            break
        if new_mu == mu:
            break
        mu = new_mu
    resid = excess(mu)
    if abs(resid) > tol:
        raise TargetOutOfRange(f"Gibbs solve left energy residual {resid:.3e}")

    log_c = -_log_partition(grid, -mu * hv)
    density = DensityField(grid, np.exp(log_c - mu * hv), floor)
    return GibbsSolution(mu=float(mu), log_c=float(log_c), density=density)


@dataclass(frozen=True, eq=False)
class MomentConstraint:
    """Expected value ``target`` of ``observable`` under the density."""

    observable: ScalarField
    target: float


def _observable_matrix(grid: Grid, constraints) -> np.ndarray:
    rows = []
    for c in constraints:
        obs = c.observable
        values = getattr(obs, "values", obs)
        if getattr(obs, "grid", grid) != grid:
            raise ValueError("constraint observable lives on a different grid")
        rows.append(ScalarField(grid, values).values)
    return np.array(rows)


def _check_independent(grid: Grid, H: np.ndarray) -> None:
    w = grid.weights / grid.measure
    centered = H - (H @ w)[:, None]
    gram = (centered * w) @ centered.T
    diag = np.diag(gram)
    if np.any(diag <= 1e-24 * np.maximum(1.0, np.max(H**2, axis=1))):
        raise SingularHessian("a constant observable cannot be constrained")
    corr = gram / np.sqrt(np.outer(diag, diag))
    if np.linalg.eigvalsh(corr).min() <= 1e-12:
        raise SingularHessian("observables are linearly dependent")


def jaynes_maxent(grid: Grid, constraints, floor: float = DEFAULT_FLOOR) -> tuple[DensityField, list[float]]:
    """Maximum-entropy density matching every moment constraint.

    Solves the dual ``min_lambda log Z(lambda) + lambda . targets`` by damped
    Newton iteration from ``lambda = 0``. The density is
    ``exp(-sum_m lambda_m H_m) / Z``.
    """
    constraints = list(constraints)
    if not constraints:
        return uniform_limit(grid, floor), []

    H = _observable_matrix(grid, constraints)
    targets = np.array([float(c.target) for c in constraints])
    _check_independent(grid, H)
    for m, (row, t) in enumerate(zip(H, targets)):
        lo, hi = row.min(), row.max()
        pad = FEASIBILITY_MARGIN * max(1.0, hi - lo)
        if not lo + pad < t < hi - pad:
            raise InfeasibleConstraints(f"target {t} of constraint {m} is outside ({lo}, {hi})")

    log_w = np.log(grid.weights)

    def dual(lam):
        return _log_partition(grid, -lam @ H) + lam @ targets

    lam = np.zeros(len(constraints))
    tol = 1e-13 * max(1.0, float(np.abs(targets).max()))
    for _ in range(MAX_NEWTON_ITER):
        a = log_w - lam @ H
        q = np.exp(a - logsumexp(a))
        mean = H @ q
        grad = targets - mean
        if np.max(np.abs(grad)) <= tol:
            break
        cov = (H * q) @ H.T - np.outer(mean, mean)
        try:
            direction = -np.linalg.solve(cov, grad)
        except np.linalg.LinAlgError as exc:
            # observables are independent, so this means the multipliers ran off
            raise InfeasibleConstraints("moment covariance collapsed; targets are jointly infeasible") from exc
        current = dual(lam)
        t = 1.0
        for _ in range(60):
            trial = lam + t * direction
            value = dual(trial)
            if np.isfinite(value) and value <= current + 1e-15 * abs(current):
                break
            t *= 0.5
        else:
            raise InfeasibleConstraints("damped Newton could not decrease the dual")
        if not np.all(np.isfinite(trial)):
            raise InfeasibleConstraints("multipliers diverged")
        lam = trial

    exponent = -lam @ H
    values = np.exp(exponent - _log_partition(grid, exponent))
    density = DensityField(grid, values, floor)
    residual = H @ (grid.weights * values) - targets
    if np.max(np.abs(residual)) > MOMENT_TOL * max(1.0, float(np.abs(targets).max())):
        raise InfeasibleConstraints(f"moment residual {np.max(np.abs(residual)):.3e} after Newton")
    return density, [float(x) for x in lam]
