import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgrg.measures import (
    ModelParameters,
    NeighbourhoodMeasure,
    profile_marginals,
    q_measure_adaptive,
)
from cgrg.rates import (
    RateResult,
    conditional_poisson,
    contraction_minimum,
    isolated_root,
    poisson_pmf,
    psi,
    rate_I,
    rate_J,
    rate_eta1,
    rate_eta_inner,
    rate_xi1,
    rate_zeta,
    typical_measures,
)


def poisson_vector(lam, size):
    return np.array([poisson_pmf(lam, m) for m in range(size)])


# ---------------------------------------------------------------------------
# scaffolding
# ---------------------------------------------------------------------------
def test_rate_result_clamps_round_off_only():
    r = RateResult(-1e-12)
    assert r.value == 0.0
    assert r.diagnostics["clamped_from"] == -1e-12
    assert RateResult(-1.0).value == -1.0  # genuine negativity is preserved


def test_poisson_pmf():
    assert poisson_pmf(0.0, 0) == 1.0
    assert poisson_pmf(0.0, 3) == 0.0
    assert poisson_pmf(2.0, 3) == pytest.approx(math.exp(-2) * 8 / 6, rel=1e-14)


# ---------------------------------------------------------------------------
# zeros at the typical measures
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_monochrome_rate_zeros(d, c):
    params = ModelParameters(
        k=1, d=d, nu=np.array([1.0]), C=np.array([[c]]), geometry="torus"
    )
    typ = typical_measures(params, degree_cap=80)
    rho_c = params.rho * c
    assert rate_eta1(typ.delta, c, d).value == pytest.approx(0.0, abs=1e-9)
    assert rate_xi1(math.exp(-rho_c), c, d).value == pytest.approx(0.0, abs=1e-9)
    assert rate_zeta(typ.edges_per_vertex, params).value == pytest.approx(0.0, abs=1e-6)
    assert rate_I(typ.omega, typ.varpi, params).value == pytest.approx(0.0, abs=1e-9)
    assert rate_J(typ.varpi, typ.mu, params).value == pytest.approx(0.0, abs=1e-9)


def test_two_colour_rate_zeros(two_colour_params):
    typ = typical_measures(two_colour_params)
    assert rate_I(typ.omega, typ.varpi, two_colour_params).value == pytest.approx(
        0.0, abs=1e-9
    )
    assert rate_J(typ.varpi, typ.mu, two_colour_params).value == pytest.approx(
        0.0, abs=1e-9
    )
    assert rate_zeta(typ.edges_per_vertex, two_colour_params).value == pytest.approx(
        0.0, abs=1e-6
    )


def test_typical_measures_values(mono_params, two_colour_params):
    typ = typical_measures(mono_params)
    assert typ.delta[0] == pytest.approx(math.exp(-math.pi), rel=1e-12)
    assert typ.edges_per_vertex == pytest.approx(math.pi / 2.0, rel=1e-12)
    assert typ.mu_truncated_mass < 1e-12
    typ2 = typical_measures(two_colour_params)
    lams = two_colour_params.rho * two_colour_params.C @ two_colour_params.nu
    expected_iso = float(two_colour_params.nu @ np.exp(-lams))
    assert typ2.delta[0] == pytest.approx(expected_iso, rel=1e-12)
    # neighbourhood measure marginals recover the typical pair measure
    mu1, h2 = profile_marginals(typ2.mu)
    assert np.allclose(mu1, typ2.omega, atol=1e-11)
    assert np.max(np.abs(h2 - typ2.varpi)) < 1e-9


# ---------------------------------------------------------------------------
# degree rate eta_1
# ---------------------------------------------------------------------------
def test_eta1_poisson_closed_form():
    # at delta = Poisson(x) the entropy term cancels and
    # eta_1 = x/2 log(x/(rho c)) - x/2 + rho c / 2
    for x in (0.5, 2.0, math.pi):
        delta = poisson_vector(x, 60)
        expected = 0.5 * x * math.log(x / math.pi) - 0.5 * x + 0.5 * math.pi
        assert rate_eta1(delta, 1.0, 2).value == pytest.approx(expected, abs=1e-9)


def test_eta1_point_mass_at_zero():
    delta = np.zeros(5)
    delta[0] = 1.0
    assert rate_eta1(delta, 1.0, 2).value == pytest.approx(math.pi / 2.0, rel=1e-12)


def test_eta_inner_increasing_beyond_mean_for_supercritical_mean():
    # the inner rate is nondecreasing in x beyond the mean whenever the mean
    # is at least rho(d) c (its x-derivative there is log(mean / rho c) / 2)
    delta = poisson_vector(4.0, 80)
    delta[0] += 1.0 - delta.sum()  # absorb the truncated tail
    base = rate_eta1(delta, 1.0, 2).value
    mean = float(np.arange(80) @ delta)
    gaps = [
        rate_eta_inner(delta, mean + eps, 1.0, 2).value - base
        for eps in (0.1, 0.5, 2.0)
    ]
    assert all(g > 0 for g in gaps)
    assert gaps[0] < gaps[1] < gaps[2]


# ---------------------------------------------------------------------------
# isolated-vertex rate xi_1
# ---------------------------------------------------------------------------
def test_isolated_root_solves_equation():
    for y in (0.05, 0.3, 0.9):
        a, residual = isolated_root(y, 1.0, 2)
        assert residual < 1e-10
        assert a * (1.0 - math.exp(-a)) == pytest.approx(math.pi * (1.0 - y), rel=1e-12)


def test_xi1_zero_only_at_typical_value():
    y_star = math.exp(-math.pi)
    assert rate_xi1(y_star, 1.0, 2).value == pytest.approx(0.0, abs=1e-12)
    for y in (0.001, 0.01, 0.2, 0.6, 0.99):
        assert rate_xi1(y, 1.0, 2).value > 1e-4


def test_xi1_boundary_values():
    assert rate_xi1(1.0, 1.0, 2).value == pytest.approx(math.pi / 2.0, rel=1e-12)
    assert rate_xi1(0.0, 1.0, 2).value > 0.0
    with pytest.raises(ValueError):
        rate_xi1(1.5, 1.0, 2)


@given(st.floats(min_value=0.01, max_value=0.99))
@settings(max_examples=30, deadline=None)
def test_xi1_matches_variational_form(y):
    # xi_1(y) = inf over b of the two-parameter expression; at the optimum
    # b = a(y), so a small scan around the root never beats the closed form
    value = rate_xi1(y, 1.0, 2).value
    a, _ = isolated_root(y, 1.0, 2)
    rho_c = math.pi

    def two_parameter(b):
        # y log y + rho c y(1-y/2) - (1-y)[log(rho c / b) - (b - rho c (1-y))^2/(2 rho c (1-y))]
        # with the square completed at b
        return (
            y * math.log(y)
            + rho_c * y * (1 - y / 2)
            - (1 - y)
            * (math.log(rho_c / b) - (b - rho_c * (1 - y)) ** 2 / (2 * rho_c * (1 - y)))
        )

    assert value == pytest.approx(two_parameter(a), rel=1e-10)
    for b in (0.5 * a, 0.9 * a, 1.1 * a, 2.0 * a):
        # moving b off the root cannot produce a smaller admissible value
        # via the conditional-Poisson family realized at that b
        delta = conditional_poisson(y, b, 200)
        assert rate_eta1(delta, 1.0, 2).value >= value - 1e-9


# ---------------------------------------------------------------------------
# contraction: degree rate projects to the isolated-vertex rate
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("y", [0.1, 0.5])
def test_contraction_minimum_matches_xi1(y):
    found, minimizer = contraction_minimum(y, 1.0, 2)
    target = rate_xi1(y, 1.0, 2)
    assert found.value == pytest.approx(target.value, abs=1e-3)
    reference = conditional_poisson(y, target.diagnostics["root"], len(minimizer) - 1)
    assert np.max(np.abs(minimizer - reference)) < 1e-4
    assert minimizer[0] == y
    assert minimizer.sum() == pytest.approx(1.0, abs=1e-9)


def test_conditional_poisson_normalizes():
    w = conditional_poisson(0.3, 2.0, 80)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert w[0] == 0.3
    # proportional to Poisson(2) on {1, 2, ...}
    ratio = w[2] / w[1]
    assert ratio == pytest.approx(1.0, rel=1e-12)  # 2^2/2! over 2^1/1!


# ---------------------------------------------------------------------------
# pair-level rates I and J
# ---------------------------------------------------------------------------
def test_rate_I_infinite_off_support():
    params = ModelParameters(
        k=2, d=2, nu=np.array([1.0, 0.0]), C=np.ones((2, 2)), geometry="torus"
    )
    varpi = params.rho * np.outer([0.5, 0.5], [0.5, 0.5])
    assert rate_I(np.array([0.5, 0.5]), varpi, params).value == math.inf


def test_rate_I_positive_away_from_typical(two_colour_params):
    omega = np.array([0.5, 0.5])
    varpi = two_colour_params.rho * two_colour_params.C * np.outer(omega, omega)
    r = rate_I(omega, varpi, two_colour_params)
    # pair term vanishes at the matched reference; only the colour term remains
    expected = 0.5 * math.log(0.5 / 0.3) + 0.5 * math.log(0.5 / 0.7)
    assert r.value == pytest.approx(expected, rel=1e-12)


def test_rate_J_poisson_mean_shift_oracle(mono_params):
    # monochrome, profile law Poisson(lambda), pair measure [[lambda]]:
    # J = lambda/2 log(lambda/(rho c)) - lambda/2 + rho c / 2
    lam = 2.0
    mu = NeighbourhoodMeasure(
        1, {(0, (m,)): poisson_pmf(lam, m) for m in range(80)}
    )
    r = rate_J(np.array([[lam]]), mu, mono_params)
    expected = math.log(2.0 / math.pi) - 1.0 + math.pi / 2.0
    assert r.value == pytest.approx(expected, abs=1e-9)
    # and it agrees with the degree rate of the same Poisson law
    assert r.value == pytest.approx(
        rate_eta1(poisson_vector(lam, 80), 1.0, 2).value, abs=1e-9
    )


def test_rate_J_infinite_when_inconsistent(mono_params):
    mu = q_measure_adaptive(np.array([[1.5]]), np.array([1.0])).measure
    assert rate_J(np.array([[1.0]]), mu, mono_params).value == math.inf


# ---------------------------------------------------------------------------
# edges-per-vertex rate zeta and the simplex problem psi
# ---------------------------------------------------------------------------
def test_zeta_monochrome_closed_form(mono_params):
    rho_c = math.pi
    for x in (0.2, 1.0, math.pi, 4.0):
        expected = x * math.log(x / (rho_c / 2.0)) - x + rho_c / 2.0
        assert rate_zeta(x, mono_params).value == pytest.approx(expected, rel=1e-10)
    assert rate_zeta(0.0, mono_params).value == pytest.approx(rho_c / 2.0, rel=1e-12)


def _psi_oracle_two_colours(y, params):
    # independent oracle: for k=2 the energy constraint is a quadratic in
    # omega = (t, 1-t); solve it exactly and scan the feasible roots
    rho = params.rho
    C = params.C
    best = math.inf
    # 0.5 rho [C00 t^2 + 2 C01 t(1-t) + C11 (1-t)^2] = y
    a = 0.5 * rho * (C[0, 0] - 2 * C[0, 1] + C[1, 1])
    b = 0.5 * rho * (2 * C[0, 1] - 2 * C[1, 1])
    c0 = 0.5 * rho * C[1, 1] - y
    roots = np.roots([a, b, c0]) if abs(a) > 1e-15 else np.array([-c0 / b])
    for t in roots:
        if abs(t.imag) > 1e-12 or not 0.0 <= t.real <= 1.0:
            continue
        w = np.array([t.real, 1.0 - t.real])
        ent = sum(
            wi * math.log(wi / ni) for wi, ni in zip(w, params.nu) if wi > 0
        )
        best = min(best, ent)
    return best


@pytest.mark.parametrize("y", [1.2, 1.5, 1.8])
def test_psi_matches_exact_two_colour_oracle(y, two_colour_params):
    oracle = _psi_oracle_two_colours(y, two_colour_params)
    found = psi(y, two_colour_params)
    if oracle == math.inf:
        assert found.value == math.inf
    else:
        assert found.value == pytest.approx(oracle, abs=1e-7)


def test_psi_zero_at_typical_energy(two_colour_params):
    typ = typical_measures(two_colour_params)
    assert psi(typ.edges_per_vertex, two_colour_params).value == pytest.approx(
        0.0, abs=1e-9
    )


def test_psi_infinite_outside_energy_range(two_colour_params):
    assert psi(100.0, two_colour_params).value == math.inf
    assert psi(1e-6, two_colour_params).value == math.inf
