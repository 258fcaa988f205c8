"""Acceptance suite: ten numbered criteria, one printed pass/fail line each.

Each criterion is a separate test so the pytest summary doubles as the
checklist.  Tolerances are part of the contract and are asserted as stated.
"""
import math

import numpy as np
import pytest

from cgrg import grid
from cgrg.geometry import ball_volume
from cgrg.graphgen import TiltingPotentials, sample_cgrg, sample_tilted
from cgrg.measures import (
    ModelParameters,
    empirical_measures,
    profile_marginals,
    q_measure_adaptive,
)
from cgrg.mc import (
    EventSpec,
    edges_per_vertex_tilt,
    estimate_tail,
    euler_check,
    isolated_fraction_tilt,
    replica_seed,
    run_typical,
    tail_bound_check,
    tail_curve,
)
from cgrg.rates import (
    conditional_poisson,
    contraction_minimum,
    rate_I,
    rate_J,
    rate_eta1,
    rate_xi1,
    rate_zeta,
    typical_measures,
)


def report(number: int, description: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"criterion {number:2d} [{status}] {description}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert passed, line


MONO = ModelParameters(
    k=1, d=2, nu=np.array([1.0]), C=np.array([[1.0]]), geometry="torus"
)
TWO = ModelParameters(
    k=2,
    d=2,
    nu=np.array([0.3, 0.7]),
    C=np.array([[2.0, 0.5], [0.5, 1.0]]),
    geometry="torus",
)


def test_criterion_01_ball_volume_constants():
    ok = (
        abs(ball_volume(1) - 2.0) < 1e-12
        and abs(ball_volume(2) - math.pi) < 1e-12
        and abs(ball_volume(3) - 4.0 * math.pi / 3.0) < 1e-12
    )
    report(1, "unit-ball volumes in dimensions 1-3 to 1e-12", ok)


def test_criterion_02_rate_function_zeros():
    worst = 0.0
    worst_zeta = 0.0
    for d in (1, 2, 3):
        for c in (0.5, 1.0, 2.0):
            params = ModelParameters(
                k=1, d=d, nu=np.array([1.0]), C=np.array([[c]]), geometry="torus"
            )
            typ = typical_measures(params, degree_cap=100)
            rho_c = params.rho * c
            worst = max(
                worst,
                abs(rate_eta1(typ.delta, c, d).value),
                abs(rate_xi1(math.exp(-rho_c), c, d).value),
                abs(rate_I(typ.omega, typ.varpi, params).value),
                abs(rate_J(typ.varpi, typ.mu, params).value),
            )
            worst_zeta = max(
                worst_zeta, abs(rate_zeta(typ.edges_per_vertex, params).value)
            )
    typ2 = typical_measures(TWO)
    worst = max(
        worst,
        abs(rate_I(typ2.omega, typ2.varpi, TWO).value),
        abs(rate_J(typ2.varpi, typ2.mu, TWO).value),
    )
    worst_zeta = max(worst_zeta, abs(rate_zeta(typ2.edges_per_vertex, TWO).value))
    ok = worst < 1e-9 and worst_zeta < 1e-6
    report(
        2,
        "all rate functions vanish at their typical points",
        ok,
        f"worst {worst:.2e}, zeta {worst_zeta:.2e}",
    )


def test_criterion_03_grid_matches_brute_force():
    rng = np.random.default_rng(303)
    mismatches = 0
    for trial in range(50):
        n = int(rng.integers(2, 301))
        d = int(rng.integers(1, 4))
        k = 1 if trial % 2 == 0 else 3
        geometry = "torus" if trial % 4 < 2 else "cube"
        points = rng.random((n, d))
        colours = rng.integers(0, k, n, dtype=np.int64)
        radii = rng.uniform(0.02, 0.25, (k, k))
        radii = 0.5 * (radii + radii.T)
        fast = grid.find_edges(points, colours, radii, geometry)
        slow = grid.brute_force_edges(points, colours, radii, geometry)
        if not np.array_equal(fast, slow):
            mismatches += 1
    report(
        3,
        "cell-grid edges equal brute force on 50 random instances",
        mismatches == 0,
        f"{mismatches} mismatches",
    )


def test_criterion_04_consistency_identities():
    rng = np.random.default_rng(404)
    worst_empirical = 0.0
    for trial in range(50):
        n = int(rng.integers(50, 400))
        params = MONO if trial % 2 == 0 else TWO
        sample = sample_cgrg(n, params, int(rng.integers(1 << 30)))
        _, l2, m, _ = empirical_measures(sample)
        _, h2 = profile_marginals(m)
        worst_empirical = max(worst_empirical, float(np.max(np.abs(h2 - l2))))
    worst_q = 0.0
    for trial in range(100):
        k = int(rng.integers(1, 4))
        mu1 = rng.dirichlet(np.ones(k))
        # keep the per-colour Poisson intensities varpi(a,b)/mu1(a) bounded
        # so the adaptive truncation stays small
        scale = rng.uniform(0.1, 3.0, (k, k))
        varpi = np.outer(mu1, mu1) * 0.5 * (scale + scale.T)
        _, h2 = profile_marginals(q_measure_adaptive(varpi, mu1).measure)
        worst_q = max(worst_q, float(np.max(np.abs(h2 - varpi))))
    # "exactly" for the empirical identity means exact arithmetic; in floats
    # the 1/n normalization leaves at most a few ulps
    ok = worst_empirical < 1e-13 and worst_q < 1e-9
    report(
        4,
        "pair measure recovered from neighbourhood measures",
        ok,
        f"empirical {worst_empirical:.1e}, product-Poisson {worst_q:.1e}",
    )


def test_criterion_05_typical_behaviour():
    run = run_typical(MONO, 4000, 100, 550)
    iso_ok = abs(run.mean_isolated - math.exp(-math.pi)) <= 3 * run.se_isolated
    epv_target = (4000 - 1) / (2 * 4000) * math.pi
    epv_ok = abs(run.mean_edges_per_vertex - epv_target) <= 3 * run.se_edges_per_vertex
    deg_ok = run.tv_degree < 0.05
    run2 = run_typical(TWO, 4000, 100, 551)
    nbhd_ok = run2.tv_neighbourhood < 0.1
    report(
        5,
        "typical behaviour at n=4000 over 100 replicas",
        iso_ok and epv_ok and deg_ok and nbhd_ok,
        f"iso {run.mean_isolated:.5f} (target {math.exp(-math.pi):.5f}), "
        f"epv {run.mean_edges_per_vertex:.4f} (target {epv_target:.4f}), "
        f"deg TV {run.tv_degree:.4f}, nbhd TV {run2.tv_neighbourhood:.4f}",
    )


def test_criterion_06_contraction_cross_check():
    worst_value = 0.0
    worst_shape = 0.0
    for y in (0.1, 0.3, 0.5, 0.7):
        found, minimizer = contraction_minimum(y, 1.0, 2)
        target = rate_xi1(y, 1.0, 2)
        worst_value = max(worst_value, abs(found.value - target.value))
        reference = conditional_poisson(
            y, target.diagnostics["root"], len(minimizer) - 1
        )
        worst_shape = max(worst_shape, float(np.max(np.abs(minimizer - reference))))
    ok = worst_value <= 1e-3 and worst_shape <= 1e-4
    report(
        6,
        "degree-rate minimum over {delta(0)=y} equals isolated-vertex rate",
        ok,
        f"value gap {worst_value:.2e}, minimizer gap {worst_shape:.2e}",
    )


def test_criterion_07_euler_lemma():
    worst = 0.0
    for c in (1.0, 2.0):
        params = ModelParameters(
            k=1, d=2, nu=np.array([1.0]), C=np.array([[c]]), geometry="torus"
        )
        for alpha in (-1.0, 1.0):
            worst = max(worst, euler_check(alpha, params, 100_000)["max_relative_error"])
    report(7, "finite-n product within 2% of its exponential limit at n=1e5", worst < 0.02, f"worst {worst:.2e}")


def test_criterion_08_importance_sampling_soundness():
    # (a) identity tilt replays plain Monte Carlo bit for bit
    s0 = sample_cgrg(400, MONO, 808)
    s1, logw = sample_tilted(400, MONO, TiltingPotentials.identity(1), 808)
    identity_ok = (
        logw == 0.0
        and np.array_equal(s0.points, s1.points)
        and np.array_equal(s0.edges, s1.edges)
    )
    # (b) mean importance weight is 1 within 3 standard errors
    pots = TiltingPotentials.scalar(0.2, -0.15, 1)
    ws = np.array(
        [
            math.exp(sample_tilted(40, MONO, pots, replica_seed(81, i))[1])
            for i in range(10_000)
        ]
    )
    se = ws.std(ddof=1) / 100.0
    weight_ok = abs(ws.mean() - 1.0) <= 3 * se
    # (c) IS and plain MC agree on a p ~ 0.1 event
    sparse = ModelParameters(
        k=1, d=2, nu=np.array([1.0]), C=np.array([[0.1]]), geometry="torus"
    )
    ev = EventSpec("edges_per_vertex", 0.235, ">=")
    plain = estimate_tail(sparse, 40, ev, 10_000, 82)
    tilted = estimate_tail(
        sparse, 40, ev, 10_000, 83, pots=edges_per_vertex_tilt(0.235, sparse)
    )
    combined = math.hypot(plain.std_err, tilted.std_err)
    agree_ok = abs(plain.p_hat - tilted.p_hat) <= 3 * combined
    report(
        8,
        "importance sampling is sound",
        identity_ok and weight_ok and agree_ok,
        f"E[w]={ws.mean():.4f}+-{se:.4f}, plain {plain.p_hat:.4f} vs IS {tilted.p_hat:.4f}",
    )


def test_criterion_09_ldp_slope_diagnostic():
    y = 0.3
    target = rate_xi1(y, 1.0, 2).value
    event = EventSpec("isolated_fraction", y, ">=")
    pots = isolated_fraction_tilt(y, MONO, policy="event_typical")
    estimates = tail_curve(
        MONO, event, [100, 200, 400, 600], 4000, 909, tilt_builder=lambda n: pots
    )
    values = [e.neg_log_rate for e in estimates]
    final_ok = values[-1] != math.inf and abs(values[-1] - target) <= 0.3 * target
    distances = [abs(v - target) for v in values]
    toward = sum(b < a for a, b in zip(distances, distances[1:]))
    trend_ok = toward >= min(3, len(values) - 1)
    report(
        9,
        "IS rate estimate approaches the isolated-vertex rate",
        final_ok and trend_ok,
        f"values {[f'{v:.4f}' for v in values]}, target {target:.4f}, "
        f"{toward} of {len(values) - 1} steps toward",
    )


def test_criterion_10_edge_count_tail_bound():
    result = tail_bound_check(MONO, 6.0, 200, 10_000, 1010)
    # the bound term e^{-n(l - pi(e-1))} is astronomically small here, so the
    # operative check is zero hits: the empirical estimate (0) sits below
    # 10x the bound, and the rule-of-three bound quantifies the resolution
    ok = result["hits"] == 0 and result["satisfied"]
    report(
        10,
        "no edge-count excursions past the exponential tail bound",
        ok,
        f"hits {result['hits']} in {result['replicas']}, "
        f"rule-of-three {result['rule_of_three']:.1e}, log-bound {result['log_bound']:.1f}",
    )
