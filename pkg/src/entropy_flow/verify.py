"""Acceptance suite: convergence, Lyapunov, conservation and form checks.

Each criterion returns a :class:`CriterionResult` with the measured values
that decided it. ``verify_suite`` runs them all and prints one line each.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import null_space

from . import diagnostics
from .density import (
    DensityField,
    ScalarField,
    centered_bilinear,
    differential_entropy,
    project_mass,
    scalar_product,
)
from .dynamics import (
    EnergyDensity,
    Mode,
    SgParams,
    StabilityWarning,
    apply_psi,
    lagrange_multipliers,
    rhs,
    rhs_mass_energy,
    rhs_mass_only,
    rhs_operator_form,
)
from .grid import build_uniform_grid, integrate
from .integrator import Trajectory, project_mass_energy, run
from .maxent import MomentConstraint, gibbs_solve, jaynes_maxent, uniform_limit
from .scenario import smooth_noise

SEEDS = tuple(range(10))
CARRIER = (0.0, 2.0)
N_NODES = 500
REFINEMENT = (250, 500, 1000)
NOISE = 0.5
ENERGY_FRACTION = 0.9  # E sits 10% below the uniform-density energy


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    notes: list[str] = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name}: {self.measured}"


@dataclass
class RunResult:
    seed: int
    n: int
    trajectory: Trajectory
    seconds: float
    energy: EnergyDensity | None = None
    gibbs: object = None


def linear_energy(grid, fraction: float = ENERGY_FRACTION) -> EnergyDensity:
    h = grid.nodes.copy()
    uniform_energy = integrate(grid, h) / grid.measure
    return EnergyDensity(grid, h, fraction * uniform_energy)


def seeded_initial(grid, seed: int, h: EnergyDensity | None = None, noise: float = NOISE, floor=1e-12):
    """Limit density times ``1 + noise * smooth_noise(seed)``, projected onto the constraints."""
    base = uniform_limit(grid, floor) if h is None else gibbs_solve(grid, h, floor).density
    values = base.values * (1.0 + noise * smooth_noise(grid, seed))
    p = project_mass(ScalarField(grid, values), floor=floor)
    if h is not None:
        p = project_mass_energy(grid, p.values, h, floor)
    return p


class AcceptanceContext:
    """Runs shared by several criteria, computed once on first use."""

    def __init__(self, gamma: float = 1.0, dt: float = 0.01, stop_tol: float = 1e-9, max_steps: int = 20_000):
        self.gamma = gamma
        self.dt = dt
        self.stop_tol = stop_tol
        self.max_steps = max_steps
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", StabilityWarning)
            self.params = SgParams(gamma=gamma, dt=dt, stop_tol=stop_tol, max_steps=max_steps)
        self.config_warnings = [str(w.message) for w in caught]
        self._runs: dict[tuple[str, int, int], RunResult] = {}

    def run(self, mode: Mode, seed: int, n: int = N_NODES) -> RunResult:
        key = (mode.value, seed, n)
        if key not in self._runs:
            grid = build_uniform_grid(*CARRIER, n)
            h = None if mode is Mode.MASS_ONLY else linear_energy(grid)
            gibbs = None if h is None else gibbs_solve(grid, h)
            limit = uniform_limit(grid) if h is None else gibbs.density
            p0 = seeded_initial(grid, seed, h)
            start = time.perf_counter()
            traj = run(p0, mode, h, self.params, limit=limit)
            seconds = time.perf_counter() - start
            self._runs[key] = RunResult(seed, n, traj, seconds, h, gibbs)
        return self._runs[key]

    @cached_property
    def mass_only_runs(self) -> list[RunResult]:
        return [self.run(Mode.MASS_ONLY, s) for s in SEEDS]

    @cached_property
    def mass_energy_runs(self) -> list[RunResult]:
        return [self.run(Mode.MASS_ENERGY, s) for s in SEEDS]

    @property
    def all_runs(self) -> list[RunResult]:
        return self.mass_only_runs + self.mass_energy_runs


def _rel_l2(p, q) -> float:
    return diagnostics.dist_l2(p, q) / math.sqrt(integrate(q.grid, q.values**2))


def criterion_uniform_limit(ctx: AcceptanceContext) -> CriterionResult:
    runs = ctx.mass_only_runs
    worst = max(r.trajectory.records[-1].dist_linf for r in runs)
    slowest = max(r.seconds for r in runs)
    converged = all(r.trajectory.converged for r in runs)
    passed = converged and worst < 1e-6 and slowest < 10.0
    steps = [r.trajectory.steps for r in runs]
    return CriterionResult(
        1,
        "uniform-limit convergence",
        passed,
        f"converged {sum(r.trajectory.converged for r in runs)}/{len(runs)}, max Linf {worst:.2e} (< 1e-6), "
        f"steps {min(steps)}-{max(steps)}, slowest run {slowest:.2f}s (< 10s)",
    )


def criterion_gibbs_limit(ctx: AcceptanceContext) -> CriterionResult:
    runs = ctx.mass_energy_runs
    worst_l2 = 0.0
    worst_lam = 0.0
    for r in runs:
        final = r.trajectory.final
        worst_l2 = max(worst_l2, _rel_l2(final, r.gibbs.density))
        lam1, lam2 = lagrange_multipliers(final, r.energy, ctx.gamma)
        worst_lam = max(worst_lam, abs(lam1 + ctx.gamma * r.gibbs.mu), abs(lam2 - ctx.gamma * r.gibbs.log_c))
    converged = all(r.trajectory.converged for r in runs)
    passed = converged and worst_l2 < 1e-4 and worst_lam <= 1e-6
    return CriterionResult(
        2,
        "Gibbs-limit convergence",
        passed,
        f"converged {sum(r.trajectory.converged for r in runs)}/{len(runs)}, max rel L2 {worst_l2:.2e} (< 1e-4), "
        f"max multiplier error {worst_lam:.2e} (<= 1e-6)",
    )


def criterion_lyapunov_monotone(ctx: AcceptanceContext) -> CriterionResult:
    max_vdot = -math.inf
    min_ds = math.inf
    for r in ctx.all_runs:
        recs = r.trajectory.records
        max_vdot = max(max_vdot, max(x.vdot_analytic for x in recs))
        if len(recs) > 1:
            min_ds = min(min_ds, min(b.entropy - a.entropy for a, b in zip(recs, recs[1:])))
    passed = max_vdot <= 1e-9 and min_ds >= -1e-9
    return CriterionResult(
        3,
        "Lyapunov monotonicity",
        passed,
        f"max vdot_analytic {max_vdot:.2e} (<= 1e-9), min per-step dS {min_ds:.2e} (>= -1e-9)",
    )


def criterion_vdot_numeric(ctx: AcceptanceContext) -> CriterionResult:
    worst_fraction = 1.0
    for r in ctx.all_runs:
        recs = [x for x in r.trajectory.records if math.isfinite(x.vdot_numeric)]
        if not recs:
            continue
        ok = sum(diagnostics.vdot_agrees(x.vdot_analytic, x.vdot_numeric) for x in recs)
        worst_fraction = min(worst_fraction, ok / len(recs))
    return CriterionResult(
        4,
        "analytic vs numeric dV/dt",
        worst_fraction >= 0.99,
        f"worst per-run agreement {100 * worst_fraction:.2f}% of steps (>= 99%)",
    )


def criterion_conservation(ctx: AcceptanceContext) -> CriterionResult:
    mass = max(abs(x.mass_residual) for r in ctx.all_runs for x in r.trajectory.records)
    energy = 0.0
    for r in ctx.mass_energy_runs:
        E = r.energy.target_energy
        energy = max(energy, max(abs(x.energy_residual) for x in r.trajectory.records) / abs(E))
    passed = mass <= 1e-10 and energy <= 1e-9
    return CriterionResult(
        5,
        "constraint conservation",
        passed,
        f"max mass residual {mass:.2e} (<= 1e-10), max energy residual/|E| {energy:.2e} (<= 1e-9)",
    )


def criterion_entropy_convergence(ctx: AcceptanceContext) -> CriterionResult:
    worst_ds = 0.0
    gh_finite = True
    worst_spread = 0.0
    for mode in Mode:
        for seed in SEEDS:
            maxima = {}
            for n in REFINEMENT:
                r = ctx.run(mode, seed, n)
                recs = r.trajectory.records
                maxima[n] = max(x.gh_moment_k2 for x in recs)
                gh_finite &= all(math.isfinite(x.gh_moment_k2) for x in recs)
                if n == N_NODES:
                    s_star = differential_entropy(r.trajectory.limit)
                    worst_ds = max(worst_ds, abs(recs[-1].entropy - s_star))
            ref = maxima[N_NODES]
            worst_spread = max(worst_spread, max(abs(v - ref) / ref for v in maxima.values()))
    passed = worst_ds <= 1e-6 and gh_finite and worst_spread <= 0.05
    return CriterionResult(
        6,
        "entropy convergence",
        passed,
        f"max |S_final - S*| {worst_ds:.2e} (<= 1e-6), gh_k2 finite: {gh_finite}, "
        f"max gh_k2 spread over n={list(REFINEMENT)} {100 * worst_spread:.2f}% (<= 5%)",
    )


def _random_grid(rng):
    a = rng.uniform(-3, 3)
    return build_uniform_grid(a, a + rng.uniform(0.1, 5), int(rng.integers(2, 200)))


def _form_scale(f, g) -> float:
    m = f.grid.measure
    return m * math.sqrt(scalar_product(f, f) * scalar_product(g, g))


def criterion_bilinear_properties(ctx: AcceptanceContext, pairs: int = 1000, seed: int = 7) -> CriterionResult:
    """Errors are relative to ``measure * ||f|| ||g||``, the natural size of the form."""
    rng = np.random.default_rng(seed)
    worst = dict(linearity=0.0, symmetry=0.0, positivity=0.0, constant=0.0, cauchy=0.0)
    nonconstant_positive = True
    for _ in range(pairs):
        grid = _random_grid(rng)
        f = ScalarField(grid, rng.normal(size=grid.n) * rng.uniform(0.1, 10))
        g = ScalarField(grid, rng.normal(size=grid.n) * rng.uniform(0.1, 10))
        k = ScalarField(grid, rng.normal(size=grid.n))
        alpha = rng.normal() * 3
        lhs = centered_bilinear(alpha * f + g, k)
        rhs_ = alpha * centered_bilinear(f, k) + centered_bilinear(g, k)
        scale = grid.measure * (abs(alpha) * math.sqrt(scalar_product(f, f)) + math.sqrt(scalar_product(g, g)))
        scale *= math.sqrt(scalar_product(k, k))
        worst["linearity"] = max(worst["linearity"], abs(lhs - rhs_) / scale)
        worst["symmetry"] = max(worst["symmetry"], abs(centered_bilinear(f, g) - centered_bilinear(g, f)) / _form_scale(f, g))
        bff = centered_bilinear(f, f)
        bgg = centered_bilinear(g, g)
        worst["positivity"] = max(worst["positivity"], max(0.0, -bff) / _form_scale(f, f))
        if grid.n > 1 and not bff > 1e-10 * _form_scale(f, f):
            nonconstant_positive = False
        c = ScalarField(grid, np.full(grid.n, rng.normal() * 5))
        worst["constant"] = max(worst["constant"], abs(centered_bilinear(c, c)) / _form_scale(c, c))
        bfg = centered_bilinear(f, g)
        excess = bfg**2 - bff * bgg
        worst["cauchy"] = max(worst["cauchy"], max(0.0, excess) / _form_scale(f, g) ** 2)
    passed = all(v <= 1e-10 for v in worst.values()) and nonconstant_positive
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return CriterionResult(
        7,
        "bilinear-form properties",
        passed,
        f"{pairs} pairs, worst relative errors: {detail} (<= 1e-10); non-constant strictly positive: {nonconstant_positive}",
    )


def random_density(grid, rng, floor: float = 1e-12) -> DensityField:
    """``exp`` of a smooth random field, normalized."""
    log_p = 1.5 * smooth_noise(grid, int(rng.integers(2**31))) + 0.3 * rng.normal(size=grid.n)
    return project_mass(ScalarField(grid, np.exp(log_p)), floor=floor)


def random_energy(grid, rng) -> EnergyDensity:
    h = grid.nodes + 0.5 * smooth_noise(grid, int(rng.integers(2**31)))
    return EnergyDensity(grid, h, float(integrate(grid, h) / grid.measure))


def criterion_form_equivalence(ctx: AcceptanceContext, states: int = 100, seed: int = 11) -> CriterionResult:
    rng = np.random.default_rng(seed)
    grid = build_uniform_grid(*CARRIER, 200)
    worst_rhs = 0.0
    worst_idem = 0.0
    for _ in range(states):
        p = random_density(grid, rng)
        h = random_energy(grid, rng)
        gamma = rng.uniform(0.1, 5)
        lam_form = rhs_mass_energy(p, h, gamma).values
        op_form = rhs_operator_form(p, Mode.MASS_ENERGY, h, gamma).values
        worst_rhs = max(worst_rhs, float(np.max(np.abs(lam_form - op_form))))
        mo = rhs_mass_only(p, gamma).values
        mo_op = rhs_operator_form(p, Mode.MASS_ONLY, None, gamma).values
        worst_rhs = max(worst_rhs, float(np.max(np.abs(mo - mo_op))))
        f = ScalarField(grid, rng.normal(size=grid.n))
        for mode in Mode:
            once = apply_psi(f, mode, h)
            twice = apply_psi(once, mode, h)
            worst_idem = max(worst_idem, float(np.max(np.abs(twice.values - once.values))))
    passed = worst_rhs <= 1e-12 and worst_idem <= 1e-10
    return CriterionResult(
        8,
        "lambda-form / Psi-form equivalence",
        passed,
        f"{states} densities, max node-wise rhs difference {worst_rhs:.2e} (<= 1e-12), "
        f"max Psi idempotence defect {worst_idem:.2e} (<= 1e-10)",
    )


def admissible_basis(grid, h: EnergyDensity | None = None) -> np.ndarray:
    """Rows are perturbations orthonormal in the quadrature product that keep mass (and energy) fixed."""
    sqrt_w = np.sqrt(grid.weights)
    constraints = [sqrt_w]
    if h is not None:
        constraints.append(sqrt_w * h.values)
    basis = null_space(np.array(constraints))
    return (basis / sqrt_w[:, None]).T


def fd_entropy_gradient(p: DensityField, basis: np.ndarray, eps: float) -> np.ndarray:
    """Central finite-difference gradient of S restricted to ``span(basis)``."""
    grid = p.grid
    coeffs = np.empty(len(basis))
    for i, delta in enumerate(basis):
        plus = DensityField(grid, p.values + eps * delta, p.floor)
        minus = DensityField(grid, p.values - eps * delta, p.floor)
        coeffs[i] = (differential_entropy(plus) - differential_entropy(minus)) / (2 * eps)
    return coeffs @ basis


def criterion_speed_gradient(ctx: AcceptanceContext, states: int = 20, seed: int = 13, eps: float = 1e-6) -> CriterionResult:
    rng = np.random.default_rng(seed)
    grid = build_uniform_grid(*CARRIER, 64)
    worst = 1.0
    for i in range(states):
        p = random_density(grid, rng)
        if i % 2:
            h = random_energy(grid, rng)
            mode = Mode.MASS_ENERGY
        else:
            h, mode = None, Mode.MASS_ONLY
        grad = fd_entropy_gradient(p, admissible_basis(grid, h), eps)
        u = rhs(p, mode, h, ctx.gamma)
        g = ScalarField(grid, grad)
        cos = scalar_product(g, u) / math.sqrt(scalar_product(g, g) * scalar_product(u, u))
        worst = min(worst, cos)
    return CriterionResult(
        9,
        "speed-gradient direction",
        worst >= 0.999,
        f"{states} states, min cosine(fd gradient of S, rhs) {worst:.8f} (>= 0.999) at eps {eps:g}",
    )


def criterion_maxent_cross_oracle(ctx: AcceptanceContext) -> CriterionResult:
    grid = build_uniform_grid(*CARRIER, N_NODES)
    h = linear_energy(grid)
    gibbs = gibbs_solve(grid, h)
    density, lam = jaynes_maxent(grid, [MomentConstraint(h.field, h.target_energy)])
    err = float(np.max(np.abs(density.values - gibbs.density.values)))
    empty, lam0 = jaynes_maxent(grid, [])
    exact_uniform = np.array_equal(empty.values, uniform_limit(grid).values) and lam0 == []
    passed = err <= 1e-8 and exact_uniform
    return CriterionResult(
        10,
        "MaxEnt cross-oracle",
        passed,
        f"jaynes vs gibbs Linf {err:.2e} (<= 1e-8), multiplier {lam[0]:.10f} vs mu {gibbs.mu:.10f}, "
        f"zero constraints == uniform exactly: {exact_uniform}",
    )


CRITERIA = (
    criterion_uniform_limit,
    criterion_gibbs_limit,
    criterion_lyapunov_monotone,
    criterion_vdot_numeric,
    criterion_conservation,
    criterion_entropy_convergence,
    criterion_bilinear_properties,
    criterion_form_equivalence,
    criterion_speed_gradient,
    criterion_maxent_cross_oracle,
)


def verify_suite(ctx: AcceptanceContext | None = None, echo=print) -> list[CriterionResult]:
    ctx = ctx or AcceptanceContext()
    for msg in ctx.config_warnings:
        echo(f"[WARN] configuration: {msg}")
    results = []
    for check in CRITERIA:
        try:
            result = check(ctx)
        except Exception as exc:  # a crash is reported as a failed criterion
            number = CRITERIA.index(check) + 1
            result = CriterionResult(number, check.__name__, False, f"raised {type(exc).__name__}: {exc}")
        results.append(result)
        echo(result.line())
    failed = sum(not r.passed for r in results)
    echo(f"{len(results) - failed}/{len(results)} criteria passed")
    return results
