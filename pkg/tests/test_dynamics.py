import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropy_flow import (
    DensityField,
    EnergyDensity,
    Mode,
    ScalarField,
    SgParams,
    apply_psi,
    build_uniform_grid,
    differential_entropy,
    integrate,
    lagrange_multipliers,
    rhs_mass_energy,
    rhs_mass_only,
    scalar_product,
)
from entropy_flow.dynamics import StabilityWarning, rhs_operator_form
from entropy_flow.errors import DegenerateEnergy


def random_density(grid, seed):
    r = np.random.default_rng(seed)
    k = np.arange(1, 5)
    c = r.normal(size=4)
    log_p = (c[:, None] * np.sin(np.pi * k[:, None] * grid.nodes[None, :] / grid.measure)).sum(0)
    return DensityField.from_values(grid, np.exp(log_p + 0.1 * r.normal(size=grid.n)))


def random_energy(grid, seed):
    r = np.random.default_rng(seed + 1)
    return EnergyDensity(grid, grid.nodes + 0.3 * r.normal(size=grid.n), 0.0)


seeds = st.integers(0, 2**32 - 1)


def test_uniform_is_fixed_point():
    for a, b in [(0, 2), (-1, 3), (0, 1)]:
        g = build_uniform_grid(a, b, 64)
        p = DensityField(g, np.full(64, 1 / (b - a)))
        assert np.max(np.abs(rhs_mass_only(p, 1.7).values)) <= 1e-15


def test_zero_gain_gives_zero_rhs(grid02, linear_h):
    p = random_density(grid02, 3)
    assert np.all(rhs_mass_only(p, 0.0).values == 0)
    assert np.max(np.abs(rhs_mass_energy(p, linear_h, 0.0).values)) == 0


def test_mass_only_against_closed_form_mean():
    g = build_uniform_grid(0, 1, 20000)
    p = DensityField(g, 2 * g.nodes)  # midpoint rule integrates 2r exactly
    u = rhs_mass_only(p, 1.0).values
    # int_0^1 log(2r) dr = log 2 - 1
    expected = -(np.log(2 * g.nodes) - (math.log(2) - 1))
    assert np.max(np.abs(u - expected)) < 1e-3


def test_multipliers_degenerate_energy(grid02):
    p = random_density(grid02, 1)
    h = EnergyDensity(grid02, np.full(grid02.n, 2.5), 2.5)
    with pytest.raises(DegenerateEnergy):
        lagrange_multipliers(p, h, 1.0)
    with pytest.raises(DegenerateEnergy):
        rhs_mass_energy(p, h, 1.0)
    with pytest.raises(DegenerateEnergy):
        apply_psi(p.log(), Mode.MASS_ENERGY, h)


def test_multipliers_of_exponential_family(grid02, linear_h):
    a, gamma = -0.7, 1.3
    # b is fixed by normalization
    b = -math.log(integrate(grid02, np.exp(a * linear_h.values)))
    p = DensityField(grid02, np.exp(a * linear_h.values + b))
    lam1, lam2 = lagrange_multipliers(p, linear_h, gamma)
    assert lam1 == pytest.approx(gamma * a, abs=1e-12)
    assert lam2 == pytest.approx(gamma * b, abs=1e-12)


def test_multipliers_for_uniform_against_quadrature(grid02, linear_h):
    # scipy.quad of the two formulas for p = 1/2, h = r on [0, 2] gives (0, -log 2)
    p = DensityField(grid02, np.full(grid02.n, 0.5))
    lam1, lam2 = lagrange_multipliers(p, linear_h, 1.0)
    assert lam1 == pytest.approx(0.0, abs=1e-12)
    assert lam2 == pytest.approx(-0.6931471805599452, abs=1e-12)


def test_gibbs_nodes_are_equilibrium(grid02, linear_h):
    mu = 0.8
    p = DensityField.from_values(grid02, np.exp(-mu * linear_h.values))
    assert np.max(np.abs(rhs_mass_energy(p, linear_h, 2.0).values)) <= 1e-12


def test_uniform_rhs_is_tangent(grid02, linear_h):
    p = DensityField(grid02, np.full(grid02.n, 0.5))
    u = rhs_mass_energy(p, linear_h, 1.0)
    assert abs(integrate(grid02, u.values)) < 1e-9
    assert abs(integrate(grid02, u.values * linear_h.values)) < 1e-9


def test_psi_keeps_its_range(grid02, linear_h):
    c = ScalarField(grid02, 4.2)
    for mode in Mode:
        np.testing.assert_allclose(apply_psi(c, mode, linear_h).values, 4.2, rtol=0, atol=1e-13)
    ht = linear_h.centered()
    np.testing.assert_allclose(apply_psi(ht, Mode.MASS_ENERGY, linear_h).values, ht.values, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_psi_idempotent(seed):
    g = build_uniform_grid(0, 2, 80)
    h = random_energy(g, seed)
    f = ScalarField(g, np.random.default_rng(seed).normal(size=g.n))
    for mode in Mode:
        once = apply_psi(f, mode, h)
        np.testing.assert_allclose(apply_psi(once, mode, h).values, once.values, rtol=0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0.05, 5))
def test_multiplier_form_matches_operator_form(seed, gamma):
    g = build_uniform_grid(0, 2, 120)
    p = random_density(g, seed)
    h = random_energy(g, seed)
    np.testing.assert_allclose(
        rhs_mass_only(p, gamma).values, rhs_operator_form(p, "mass-only", None, gamma).values, rtol=0, atol=1e-12
    )
    np.testing.assert_allclose(
        rhs_mass_energy(p, h, gamma).values,
        rhs_operator_form(p, "mass-energy", h, gamma).values,
        rtol=0,
        atol=1e-12,
    )


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0.05, 5))
def test_tangency_and_entropy_production(seed, gamma):
    g = build_uniform_grid(-1, 2, 90)
    p = random_density(g, seed)
    h = random_energy(g, seed)
    log_p = p.log()
    u1 = rhs_mass_only(p, gamma)
    u2 = rhs_mass_energy(p, h, gamma)
    scale = gamma * math.sqrt(g.measure * scalar_product(log_p, log_p))
    assert abs(integrate(g, u1.values)) <= 1e-12 * scale
    assert abs(integrate(g, u2.values)) <= 1e-12 * scale
    assert abs(integrate(g, u2.values * h.values)) <= 1e-11 * scale * np.max(np.abs(h.values))
    # entropy production -<u, log p> is nonnegative
    assert -scalar_product(u1, log_p) >= -1e-10
    assert -scalar_product(u2, log_p) >= -1e-10


@pytest.mark.parametrize("mode", list(Mode))
def test_rhs_is_steepest_admissible_entropy_ascent(mode):
    g = build_uniform_grid(0, 2, 48)
    p = random_density(g, 5)
    h = random_energy(g, 5) if mode is Mode.MASS_ENERGY else None
    u = rhs_operator_form(p, mode, h, 1.0)
    eps = 1e-4

    def unit(v):
        return v / math.sqrt(integrate(g, v * v))

    def gain(direction):
        q = DensityField(g, p.values + eps * direction, p.floor)
        return differential_entropy(q) - differential_entropy(p)

    best = gain(unit(u.values))
    r = np.random.default_rng(9)
    for _ in range(200):
        d = ScalarField(g, r.normal(size=g.n))
        d = d - apply_psi(d, mode, h)  # admissible: keeps mass (and energy)
        assert gain(unit(d.values)) <= best + 10 * eps**2


def test_fixed_points_are_exactly_span(grid02, linear_h):
    # log p in span{1, h}: rhs vanishes; add a quadratic component: it does not
    base = np.exp(-0.4 * grid02.nodes)
    p_eq = DensityField.from_values(grid02, base)
    p_off = DensityField.from_values(grid02, base * np.exp(0.05 * grid02.nodes**2))
    assert np.max(np.abs(rhs_mass_energy(p_eq, linear_h, 1.0).values)) < 1e-12
    assert np.max(np.abs(rhs_mass_energy(p_off, linear_h, 1.0).values)) > 1e-3
    assert np.max(np.abs(rhs_mass_only(p_eq, 1.0).values)) > 1e-3


def test_stability_cap_warns():
    with pytest.warns(StabilityWarning):
        params = SgParams(gamma=2.0, dt=0.3)
    assert params.over_stability_cap
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SgParams(gamma=1.0, dt=0.5)


@pytest.mark.parametrize("kwargs", [dict(gamma=0.0), dict(dt=-1.0), dict(floor=0.0), dict(stop_tol=0.0)])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        SgParams(**kwargs)
