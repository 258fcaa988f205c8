"""Large-deviation rate functions for coloured random geometric graphs.

Provides the joint rate J for (colour, pair, neighbourhood) measures, the
rate I for (colour, pair) measures, the degree-distribution rate eta_1, the
isolated-vertex rate xi_1, and the edges-per-vertex rate zeta, together with
the typical (zero-rate) measures each of them vanishes at.

All rates are reported through :class:`RateResult`, which carries the value
plus solver diagnostics (root residuals, truncation masses, optimizer
status) so numerical claims can be audited.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy import optimize

from cgrg.geometry import ball_volume
from cgrg.measures import (
    Consistency,
    DegreeDistribution,
    MeasureError,
    ModelParameters,
    NeighbourhoodMeasure,
    check_consistency,
    h_functional,
    profile_marginals,
    q_measure_adaptive,
    relative_entropy,
)

ROOT_RESIDUAL = 1e-12


@dataclass
class RateResult:
    """A rate-function value plus solver diagnostics."""

    value: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        # rates are nonnegative; clamp pure round-off, never real negativity
        if -1e-9 < self.value < 0.0:
            self.diagnostics.setdefault("clamped_from", self.value)
            self.value = 0.0


def poisson_pmf(lam: float, m: int) -> float:
    """Poisson(lam) probability of m, computed in log space."""
    if lam < 0 or m < 0:
        raise ValueError(f"need lam >= 0 and m >= 0, got lam={lam}, m={m}")
    if lam == 0.0:
        return 1.0 if m == 0 else 0.0
    return math.exp(-lam + m * math.log(lam) - math.lgamma(m + 1))


# ---------------------------------------------------------------------------
# joint and pair-level rates
# ---------------------------------------------------------------------------
def rate_I(omega: np.ndarray, varpi: np.ndarray, params: ModelParameters) -> RateResult:
    """Rate for the (colour measure, pair measure) pair:
    H(omega || nu) + (1/2) * pair functional of varpi relative to omega."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (params.k,):
        raise MeasureError(f"omega shape {omega.shape}, expected ({params.k},)")
    if abs(omega.sum() - 1.0) > 1e-9 or np.any(omega < 0):
        raise MeasureError("omega must be a probability vector")
    ent = relative_entropy(omega, params.nu)
    if ent == math.inf:
        return RateResult(math.inf)
    h = h_functional(varpi, omega, params)
    return RateResult(ent + 0.5 * h, {"colour_term": ent, "pair_term": 0.5 * h})


def rate_J(
    varpi: np.ndarray, mu: NeighbourhoodMeasure, params: ModelParameters
) -> RateResult:
    """Joint rate for (pair measure, neighbourhood measure).

    Finite only on consistent pairs, where the recovered pair measure of mu
    equals varpi; then it is H(mu || Q[varpi, mu1]) + H(mu1 || nu) +
    (1/2) * pair functional of varpi relative to mu1.
    """
    varpi = np.asarray(varpi, dtype=float)
    status = check_consistency(varpi, mu)
    if status is not Consistency.CONSISTENT:
        return RateResult(math.inf, {"consistency": 0.0})
    mu1, _ = profile_marginals(mu)
    colour_term = relative_entropy(mu1, params.nu)
    if colour_term == math.inf:
        return RateResult(math.inf, {"consistency": 1.0})
    h = h_functional(varpi, mu1, params)
    if h == math.inf:
        return RateResult(math.inf, {"consistency": 1.0})
    # H(mu || Q[varpi, mu1]) with Q evaluated exactly atom by atom
    terms = []
    for (a, profile), w in mu:
        if mu1[a] == 0.0:
            return RateResult(math.inf, {"consistency": 1.0})
        log_q = math.log(mu1[a])
        for b in range(params.k):
            lam = varpi[a, b] / mu1[a]
            m = profile[b]
            if lam == 0.0:
                if m > 0:
                    return RateResult(math.inf, {"consistency": 1.0})
                continue
            log_q += -lam + m * math.log(lam) - math.lgamma(m + 1)
        terms.append(w * (math.log(w) - log_q))
    q_term = math.fsum(terms)
    value = q_term + colour_term + 0.5 * h
    return RateResult(
        value,
        {
            "consistency": 1.0,
            "neighbourhood_term": q_term,
            "colour_term": colour_term,
            "pair_term": 0.5 * h,
        },
    )


# ---------------------------------------------------------------------------
# degree-distribution rate (uncoloured: C degenerates to a constant c)
# ---------------------------------------------------------------------------
def _degree_weights(delta) -> np.ndarray:
    if isinstance(delta, DegreeDistribution):
        w = delta.weights
    else:
        w = np.asarray(delta, dtype=float)
    if w.ndim != 1 or np.any(w < 0):
        raise MeasureError("degree distribution must be a nonnegative vector")
    if abs(w.sum() - 1.0) > 1e-9:
        raise MeasureError(f"degree distribution sums to {w.sum()}, expected 1")
    return w


def rate_eta_inner(delta, x: float, c: float, d: int) -> RateResult:
    """The function whose infimum over x >= mean(delta) is eta_1:
    H(delta || Poisson(x)) + (x/2) log(x / (rho(d) c)) - x/2 + rho(d) c / 2."""
    w = _degree_weights(delta)
    rho_c = ball_volume(d) * c
    if rho_c <= 0:
        raise ValueError(f"need c > 0, got c={c}")
    mean = float(np.arange(len(w)) @ w)
    if x < 0:
        raise ValueError(f"need x >= 0, got x={x}")
    if x == 0.0:
        if mean > 0:
            return RateResult(math.inf)
        return RateResult(rho_c / 2.0, {"mean": mean})
    q = np.array([poisson_pmf(x, m) for m in range(len(w))])
    ent = relative_entropy(w, q)
    value = ent + 0.5 * x * math.log(x / rho_c) - 0.5 * x + 0.5 * rho_c
    return RateResult(value, {"mean": mean, "entropy_term": ent})


def rate_eta1(delta, c: float, d: int) -> RateResult:
    """Degree-distribution rate: the inner rate evaluated at x = mean(delta)."""
    w = _degree_weights(delta)
    mean = float(np.arange(len(w)) @ w)
    return rate_eta_inner(w, mean, c, d)


# ---------------------------------------------------------------------------
# isolated-vertex rate
# ---------------------------------------------------------------------------
def isolated_root(y: float, c: float, d: int) -> Tuple[float, float]:
    """The unique positive root a of a (1 - exp(-a)) = rho(d) c (1 - y).

    Returns (root, residual).  The left side increases from 0 to infinity,
    so the root exists and is unique for y < 1.
    """
    rho_c = ball_volume(d) * c
    target = rho_c * (1.0 - y)
    if target <= 0:
        raise ValueError(f"no positive root at y={y} (target {target})")

    def fn(a):
        return a * -math.expm1(-a) - target

    hi = target + 1.0  # a(1 - e^-a) >= a - 1/e, so the root is below target + 1
    lo = min(1e-8, hi / 2)
    while fn(lo) > 0:
        lo /= 16.0
    root = optimize.brentq(fn, lo, hi, xtol=1e-15, rtol=8.9e-16)
    residual = abs(fn(root))
    if residual > ROOT_RESIDUAL * max(1.0, target):
        raise ArithmeticError(f"root residual {residual} too large at y={y}")
    return root, residual


def rate_xi1(y: float, c: float, d: int) -> RateResult:
    """Rate for the proportion of isolated vertices."""
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"y must lie in [0, 1], got {y}")
    rho_c = ball_volume(d) * c
    if y == 1.0:
        return RateResult(rho_c / 2.0, {"root": math.inf, "residual": 0.0})
    a, residual = isolated_root(y, c, d)
    y_log_y = y * math.log(y) if y > 0 else 0.0
    bracket = math.log(rho_c / a) - (a - rho_c * (1.0 - y)) ** 2 / (
        2.0 * rho_c * (1.0 - y)
    )
    value = y_log_y + rho_c * y * (1.0 - y / 2.0) - (1.0 - y) * bracket
    return RateResult(value, {"root": a, "residual": residual})


def conditional_poisson(y: float, a: float, support: int) -> np.ndarray:
    """Degree law with mass y at zero and Poisson(a) conditioned on {>= 1} above."""
    if not 0.0 <= y < 1.0 or a <= 0:
        raise ValueError(f"need 0 <= y < 1 and a > 0, got y={y}, a={a}")
    w = np.zeros(support + 1)
    w[0] = y
    norm = -math.expm1(-a)
    for m in range(1, support + 1):
        w[m] = (1.0 - y) * poisson_pmf(a, m) / norm
    return w


def contraction_minimum(
    y: float,
    c: float,
    d: int,
    *,
    support: int = 60,
    restarts: int = 8,
    seed: int = 7,
) -> Tuple[RateResult, np.ndarray]:
    """Minimize eta_1 over degree laws with delta(0) = y and support {0..support}.

    Solved by direct constrained minimization from random and moment-matched
    starting points; deliberately does not use the closed-form minimizer, so
    the result can cross-check the isolated-vertex rate independently.
    """
    if not 0.0 <= y < 1.0:
        raise ValueError(f"y must lie in [0, 1), got {y}")
    rho_c = ball_volume(d) * c
    rest = 1.0 - y
    log_fact = np.array([math.lgamma(m + 1) for m in range(support + 1)])
    grid = np.arange(support + 1, dtype=float)

    def eta(v: np.ndarray) -> float:
        # eta_1 of [y, v] with v renormalized to mass 1 - y
        v = np.maximum(v, 0.0)
        s = v.sum()
        if s <= 0:
            return math.inf
        w = np.concatenate([[y], v * (rest / s)])
        mean = float(grid @ w)
        if mean <= 0:
            return rho_c / 2.0
        # H(w || Poisson(mean)) expanded in log space
        pos = w > 0
        log_q = -mean + grid[pos] * math.log(mean) - log_fact[pos]
        ent = float(np.sum(w[pos] * (np.log(w[pos]) - log_q)))
        return ent + 0.5 * mean * math.log(mean / rho_c) - 0.5 * mean + 0.5 * rho_c

    rng = np.random.default_rng(seed)
    starts = []
    for m in (0.5, 1.0, rho_c, 2.0 * rho_c):
        # Poisson(m) conditioned on being positive: independent of the target
        tail = np.array([poisson_pmf(m, j) for j in range(1, support + 1)])
        if tail.sum() > 0:
            starts.append(rest * tail / tail.sum())
    for _ in range(restarts):
        starts.append(rest * rng.dirichlet(np.ones(support)))

    best_val, best_v = math.inf, None
    for v0 in starts:
        res = optimize.minimize(
            eta,
            v0,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * support,
            constraints=[{"type": "eq", "fun": lambda v: v.sum() - rest}],
            options={"maxiter": 1000, "ftol": 1e-14},
        )
        v = np.maximum(res.x, 0.0)
        if v.sum() > 0 and eta(v) < best_val:
            best_val, best_v = eta(v), v
    if best_v is None:
        raise ArithmeticError(f"contraction minimization failed at y={y}")
    minimizer = np.concatenate([[y], best_v * (rest / best_v.sum())])
    return RateResult(best_val, {"support": support}), minimizer


# ---------------------------------------------------------------------------
# edges-per-vertex rate
# ---------------------------------------------------------------------------
def _pair_energy(omega: np.ndarray, params: ModelParameters) -> float:
    """y(omega) = (1/2) rho(d) omega^T C omega."""
    return 0.5 * params.rho * float(omega @ params.C @ omega)


def _energy_range(params: ModelParameters) -> Tuple[float, float]:
    """Attainable range of the pair energy over the colour simplex."""
    k = params.k
    if k == 1:
        y = _pair_energy(np.ones(1), params)
        return y, y
    vertices = [_pair_energy(np.eye(k)[a], params) for a in range(k)]
    lo, hi = min(vertices), max(vertices)
    rng = np.random.default_rng(0)
    starts = rng.dirichlet(np.ones(k), size=32)
    for sign in (1.0, -1.0):
        for w0 in starts:
            res = optimize.minimize(
                lambda v, s=sign: s * _pair_energy(_softmax(v), params),
                np.log(w0 + 1e-12),
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000},
            )
            val = sign * res.fun
            lo, hi = min(lo, val), max(hi, val)
    return lo, hi


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def psi(y: float, params: ModelParameters, *, restarts: int = 20) -> RateResult:
    """inf H(omega || nu) over probability vectors with pair energy y.

    Solved by constrained minimization (SLSQP) from Dirichlet restarts;
    infinite when y is outside the attainable energy range.
    """
    k = params.k
    if k == 1:
        y0 = _pair_energy(np.ones(1), params)
        if abs(y - y0) <= 1e-9 * max(1.0, y0):
            return RateResult(0.0, {"constraint_violation": abs(y - y0)})
        return RateResult(math.inf, {"constraint_violation": abs(y - y0)})
    lo, hi = _energy_range(params)
    if y < lo - 1e-9 or y > hi + 1e-9:
        return RateResult(math.inf, {"energy_min": lo, "energy_max": hi})

    def objective(w):
        w = np.maximum(w, 0.0)
        return sum(wi * math.log(wi / ni) for wi, ni in zip(w, params.nu) if wi > 0)

    constraints = [
        {"type": "eq", "fun": lambda w: w.sum() - 1.0},
        {"type": "eq", "fun": lambda w: _pair_energy(np.maximum(w, 0.0), params) - y},
    ]
    bounds = [(0.0, 1.0)] * k
    rng = np.random.default_rng(1)
    best, best_violation = math.inf, math.inf
    starts = [params.nu] + list(rng.dirichlet(np.ones(k), size=restarts - 1))
    for w0 in starts:
        try:
            res = optimize.minimize(
                objective,
                w0,
                method="SLSQP",
                bounds=bounds,
                constraints=constraints,
                options={"maxiter": 500, "ftol": 1e-12},
            )
        except (ValueError, OverflowError):
            continue
        w = np.maximum(res.x, 0.0)
        s = w.sum()
        if s <= 0:
            continue
        w = w / s
        violation = abs(_pair_energy(w, params) - y)
        if violation < 1e-7 and objective(w) < best:
            best = objective(w)
            best_violation = violation
    if best == math.inf:
        return RateResult(math.inf, {"energy_min": lo, "energy_max": hi})
    return RateResult(best, {"constraint_violation": best_violation})


def rate_zeta(x: float, params: ModelParameters, *, grid_size: int = 64) -> RateResult:
    """Rate for the number of edges per vertex:
    x log x - x + inf_y { psi(y) - x log y + y } over attainable energies y."""
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    lo, hi = _energy_range(params)
    if params.k == 1:
        # psi vanishes only at the single attainable energy
        y_star = lo
        inner = -x * math.log(y_star) + y_star if x > 0 else y_star
        value = (x * math.log(x) - x if x > 0 else 0.0) + inner
        return RateResult(value, {"y_star": y_star, "psi_at_y_star": 0.0})

    def inner_fn(y):
        p = psi(y, params)
        if p.value == math.inf:
            return math.inf
        return p.value - (x * math.log(y) if x > 0 else 0.0) + y

    ys = np.linspace(max(lo, 1e-12), hi, grid_size)
    vals = [inner_fn(y) for y in ys]
    i = int(np.argmin(vals))
    a = ys[max(i - 1, 0)]
    b = ys[min(i + 1, len(ys) - 1)]
    if b > a:
        res = optimize.minimize_scalar(
            inner_fn, bounds=(a, b), method="bounded", options={"xatol": 1e-10}
        )
        y_star, inner = float(res.x), float(res.fun)
        if vals[i] < inner:
            y_star, inner = float(ys[i]), float(vals[i])
    else:
        y_star, inner = float(ys[i]), float(vals[i])
    value = (x * math.log(x) - x if x > 0 else 0.0) + inner
    return RateResult(
        value, {"y_star": y_star, "psi_at_y_star": psi(y_star, params).value}
    )


# ---------------------------------------------------------------------------
# typical (zero-rate) measures
# ---------------------------------------------------------------------------
@dataclass
class TypicalMeasures:
    """Measures at which every rate function vanishes."""

    omega: np.ndarray  # colour measure = nu
    varpi: np.ndarray  # pair measure = rho C nu (x) nu
    mu: NeighbourhoodMeasure  # product-Poisson neighbourhood measure
    delta: np.ndarray  # degree distribution (nu-mixture of Poissons)
    mu_truncated_mass: float
    edges_per_vertex: float  # ||varpi|| / 2


def typical_measures(params: ModelParameters, *, degree_cap: int = 0) -> TypicalMeasures:
    """The law-of-large-numbers limits of the empirical measures."""
    omega = params.nu.copy()
    varpi = params.rho * params.C * np.outer(omega, omega)
    q = q_measure_adaptive(varpi, omega)
    lams = params.rho * (params.C @ omega)
    cap = degree_cap
    if cap <= 0:
        cap = int(max(30.0, lams.max() * 3 + 30))
    delta = np.zeros(cap + 1)
    for a in range(params.k):
        for m in range(cap + 1):
            delta[m] += omega[a] * poisson_pmf(lams[a], m)
    return TypicalMeasures(
        omega=omega,
        varpi=varpi,
        mu=q.measure,
        delta=delta,
        mu_truncated_mass=q.truncated_mass,
        edges_per_vertex=0.5 * float(varpi.sum()),
    )
