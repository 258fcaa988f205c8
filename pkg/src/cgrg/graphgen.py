"""Sampling coloured random geometric graphs, plain and exponentially tilted.

The null sampler places n uniform points in [0,1]^d, colours them i.i.d.,
and joins pairs within the colour-dependent radius r(a,b) = (C(a,b)/n)^(1/d)
using a cell-grid neighbour search.

The tilted sampler reweights the colour law by exp(f) and the per-pair
connection probability by exp(g).  Given colours, tilted edges are drawn as
independent Bernoulli variables at the tilted probability: the product-form
change-of-measure weight returned alongside the sample is the exact
Radon-Nikodym derivative for that pair-independent graph law, which makes
importance-sampling reweighting unbiased.  When g is identically zero the
tilted connection probability coincides with the geometric one and the
sampler takes the geometric path, so the identity tilt reproduces the null
sampler bit for bit on the same seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from cgrg import grid
from cgrg.geometry import CUBE, GEOMETRIES, TORUS
from cgrg.measures import ModelParameters


class SampleSpaceError(ValueError):
    """Requested configuration is outside the sampler's validity region."""


# ---------------------------------------------------------------------------
# deterministic RNG derivation
# ---------------------------------------------------------------------------
def derive_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Counter-based generator keyed by (master seed, replica indices).

    Replica streams depend only on their indices, never on scheduling order.
    """
    seq = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(indices))
    return np.random.Generator(np.random.Philox(seq))


# ---------------------------------------------------------------------------
# samples
# ---------------------------------------------------------------------------
@dataclass
class GraphSample:
    """A realized coloured graph on n points in [0,1]^d."""

    n: int
    d: int
    points: np.ndarray  # (n, d)
    colours: np.ndarray  # (n,) int
    edges: np.ndarray  # (m, 2) int, i < j, lexsorted
    radii: np.ndarray  # (k, k)
    geometry: str
    seed: int

    @property
    def k(self) -> int:
        return self.radii.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "geometry": self.geometry,
            "seed": self.seed,
            "colours": self.colours.tolist(),
            "points": self.points.tolist(),
            "edges": [[int(i), int(j)] for i, j in self.edges],
            "radii": self.radii.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GraphSample":
        points = np.asarray(obj["points"], dtype=float)
        return cls(
            n=int(obj["n"]),
            d=int(obj["d"]),
            points=points.reshape(int(obj["n"]), int(obj["d"])),
            colours=np.asarray(obj["colours"], dtype=np.int64),
            edges=np.asarray(obj["edges"], dtype=np.int64).reshape(-1, 2),
            radii=np.asarray(obj["radii"], dtype=float),
            geometry=obj["geometry"],
            seed=int(obj["seed"]),
        )

    def edge_list_text(self) -> str:
        """Plain "i j" per line, for interop with graph tools."""
        return "".join(f"{i} {j}\n" for i, j in self.edges)


# ---------------------------------------------------------------------------
# pair-distance CDF
# ---------------------------------------------------------------------------
def pair_distance_cdf(t: float, d: int, geometry: str = TORUS) -> float:
    """P{ ||U1 - U2|| <= t } for independent uniform points in [0,1]^d.

    On the torus this equals ball_volume(d) * t**d exactly for t <= 1/2.
    On the cube the same expression is returned as the documented
    small-radius approximation (boundary bias of order t).
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if geometry not in GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}")
    if geometry == TORUS and t > 0.5:
        raise SampleSpaceError(
            f"torus distance CDF formula only valid for t <= 1/2, got t={t}; "
            "radii this large are outside the near-intermediate regime"
        )
    from cgrg.geometry import ball_volume

    return ball_volume(d) * t**d


# ---------------------------------------------------------------------------
# tilting potentials
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TiltingPotentials:
    """Exponential-tilt parameters: vertex potential f, symmetric pair potential g."""

    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).ravel()
        g = np.asarray(self.g, dtype=float)
        if g.shape != (len(f), len(f)):
            raise ValueError(f"g shape {g.shape} does not match f length {len(f)}")
        if np.max(np.abs(g - g.T)) > 1e-12:
            raise ValueError("g must be symmetric")
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @classmethod
    def identity(cls, k: int) -> "TiltingPotentials":
        return cls(np.zeros(k), np.zeros((k, k)))

    @classmethod
    def scalar(cls, f: float, g: float, k: int = 1) -> "TiltingPotentials":
        return cls(np.full(k, float(f)), np.full((k, k), float(g)))

    @property
    def is_identity(self) -> bool:
        return not (np.any(self.f) or np.any(self.g))

    @property
    def g_is_zero(self) -> bool:
        return not np.any(self.g)

    def u_f(self, nu: np.ndarray) -> float:
        """Normalizing constant log sum_a exp(f(a)) nu(a)."""
        return float(np.log(np.exp(self.f) @ nu))

    def tilted_nu(self, nu: np.ndarray) -> np.ndarray:
        """Tilted colour law exp(f(a) - U_f) nu(a)."""
        return np.exp(self.f - self.u_f(nu)) * nu

    def h_n(self, params: ModelParameters, n: int) -> np.ndarray:
        """h_n(a,b) = -n log(1 - F + F exp(g)) at F = F(r_n(a,b)), computed stably."""
        F = connection_probabilities(params, n)
        with np.errstate(divide="ignore"):
            log_term = np.where(
                (F > 0) & (self.g != 0),
                np.logaddexp(np.log1p(-F), np.log(np.where(F > 0, F, 1.0)) + self.g),
                0.0,
            )
        return -n * log_term

    def beta(self, params: ModelParameters) -> np.ndarray:
        """Large-n limit of h_n: rho(d) (1 - exp(g(a,b))) C(a,b)."""
        return params.rho * (1.0 - np.exp(self.g)) * params.C

    def tilted_probabilities(self, params: ModelParameters, n: int) -> np.ndarray:
        """Tilted per-pair connection probability F e^g / (1 - F + F e^g)."""
        F = connection_probabilities(params, n)
        h = self.h_n(params, n)
        with np.errstate(divide="ignore"):
            logF = np.where(F > 0, np.log(np.where(F > 0, F, 1.0)), -np.inf)
        return np.where(F > 0, np.exp(logF + self.g + h / n), 0.0)


def connection_probabilities(params: ModelParameters, n: int) -> np.ndarray:
    """Null connection probabilities F(r_n(a,b)) = rho(d) C(a,b) / n."""
    F = params.rho * params.C / n
    if np.any(F >= 1.0):
        raise SampleSpaceError(f"connection probability >= 1 at n={n}; increase n")
    return F


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------
def _check_radii(params: ModelParameters, n: int) -> np.ndarray:
    radii = params.radii(n)
    if n > 1 and params.geometry == TORUS and radii.max() > 0.5:
        raise SampleSpaceError(
            f"max radius {radii.max():.4g} exceeds 1/2 on the torus at n={n}; "
            "increase n"
        )
    return radii


def _draw_colours(rng: np.random.Generator, nu: np.ndarray, n: int) -> np.ndarray:
    cdf = np.cumsum(nu)
    u = rng.random(n)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(nu) - 1).astype(np.int64)


def sample_cgrg(n: int, params: ModelParameters, seed: int) -> GraphSample:
    """Sample the coloured random geometric graph at vertex count n.

    Deterministic given (params, seed): uniform points, i.i.d. colours, and
    an edge between every pair within its colour-pair radius.
    """
    if n < 1:
        raise SampleSpaceError(f"n must be >= 1, got {n}")
    radii = _check_radii(params, n)
    rng = derive_rng(seed)
    points = rng.random((n, params.d))
    colours = _draw_colours(rng, params.nu, n)
    edges = grid.find_edges(points, colours, radii, params.geometry)
    return GraphSample(
        n=n,
        d=params.d,
        points=points,
        colours=colours,
        edges=edges,
        radii=radii,
        geometry=params.geometry,
        seed=int(seed),
    )


def _first_distinct(rng: np.random.Generator, n_codes: int, m: int) -> np.ndarray:
    """First m distinct values of an i.i.d. uniform stream on {0..n_codes-1}.

    Equivalent in law to a uniform m-subset; vectorized rejection.
    """
    if m <= 0:
        return np.empty(0, dtype=np.int64)
    if m >= n_codes:
        return np.arange(n_codes, dtype=np.int64)
    draws = rng.integers(0, n_codes, size=m, dtype=np.int64)
    seen, first_pos = np.unique(draws, return_index=True)
    total = m
    while len(seen) < m:
        extra = rng.integers(0, n_codes, size=(m - len(seen)) + 8, dtype=np.int64)
        draws = np.concatenate([draws, extra])
        total = len(draws)
        seen, first_pos = np.unique(draws, return_index=True)
    order = np.argsort(first_pos)
    return seen[order[:m]]


def _bernoulli_edges(
    rng: np.random.Generator, colours: np.ndarray, probs: np.ndarray, k: int
) -> np.ndarray:
    """Independent per-pair edges at colour-pair probabilities, in O(|E|)."""
    groups = [np.flatnonzero(colours == a) for a in range(k)]
    parts = []
    for a in range(k):
        na = len(groups[a])
        # same-colour block: triangular codes
        n_codes = na * (na - 1) // 2
        if n_codes > 0 and probs[a, a] > 0:
            m = rng.binomial(n_codes, probs[a, a])
            codes = _first_distinct(rng, n_codes, m)
            if len(codes):
                # decode triangular index: row u, column w > u
                u = (
                    na - 2 - np.floor(
                        (np.sqrt(4 * na * (na - 1) - 8 * codes.astype(float) - 7) - 1) / 2
                    )
                ).astype(np.int64)
                base = u * na - u * (u + 1) // 2
                w = codes - base + u + 1
                parts.append(np.stack([groups[a][u], groups[a][w]], axis=1))
        for b in range(a + 1, k):
            nb = len(groups[b])
            n_codes = na * nb
            if n_codes > 0 and probs[a, b] > 0:
                m = rng.binomial(n_codes, probs[a, b])
                codes = _first_distinct(rng, n_codes, m)
                if len(codes):
                    parts.append(
                        np.stack([groups[a][codes // nb], groups[b][codes % nb]], axis=1)
                    )
    if not parts:
        return np.empty((0, 2), dtype=np.int64)
    edges = np.concatenate(parts, axis=0)
    lo = edges.min(axis=1)
    hi = edges.max(axis=1)
    order = np.lexsort((hi, lo))
    return np.stack([lo[order], hi[order]], axis=1)


def log_importance_weight(
    colours: np.ndarray,
    edges: np.ndarray,
    pots: TiltingPotentials,
    params: ModelParameters,
    n: int,
) -> float:
    """log(dP/dP~) evaluated on a realized sample.

    Equals -( n <L1, f - U_f> + (n/2) <L2, g> + (n/2) <L1 x L1, h_n>
            - (1/2) <L1_diag, h_n> ); the pair terms reduce to sums over
    realized edges and colour counts.
    """
    k = params.k
    counts = np.bincount(colours, minlength=k).astype(float)
    u_f = pots.u_f(params.nu)
    term_f = float(counts @ (pots.f - u_f))
    if len(edges):
        term_g = float(np.sum(pots.g[colours[edges[:, 0]], colours[edges[:, 1]]]))
    else:
        term_g = 0.0
    h = pots.h_n(params, n)
    term_h = (float(counts @ h @ counts) - float(counts @ np.diag(h))) / (2.0 * n)
    return -(term_f + term_g + term_h)


def sample_tilted(
    n: int, params: ModelParameters, pots: TiltingPotentials, seed: int
) -> Tuple[GraphSample, float]:
    """Sample under the tilted law and return (sample, log importance weight).

    Colours are i.i.d. from the tilted colour law.  For a nonzero pair
    potential, edges are independent Bernoulli at the tilted probability
    given colours; for g == 0 the geometric rule applies, so the identity
    tilt replays the null sampler exactly and the weight is exactly 0.
    """
    if n < 1:
        raise SampleSpaceError(f"n must be >= 1, got {n}")
    if pots.f.shape != (params.k,):
        raise ValueError(f"potentials are for k={len(pots.f)}, model has k={params.k}")
    radii = _check_radii(params, n)
    rng = derive_rng(seed)
    points = rng.random((n, params.d))
    colours = _draw_colours(rng, pots.tilted_nu(params.nu), n)
    if pots.g_is_zero:
        edges = grid.find_edges(points, colours, radii, params.geometry)
    else:
        probs = pots.tilted_probabilities(params, n)
        edges = _bernoulli_edges(rng, colours, probs, params.k)
    sample = GraphSample(
        n=n,
        d=params.d,
        points=points,
        colours=colours,
        edges=edges,
        radii=radii,
        geometry=params.geometry,
        seed=int(seed),
    )
    return sample, log_importance_weight(colours, edges, pots, params, n)


# ---------------------------------------------------------------------------
# file round-trips
# ---------------------------------------------------------------------------
def save_sample(sample: GraphSample, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(sample.to_json(), fh)


def load_sample(path: str) -> GraphSample:
    with open(path) as fh:
        return GraphSample.from_json(json.load(fh))
