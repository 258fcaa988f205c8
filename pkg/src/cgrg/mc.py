"""Monte Carlo experiments: typical behaviour, rare-event tails, diagnostics.

Every experiment maps a deterministic function over replica indices.  Replica
i of a run with master seed s always sees the same random stream, no matter
how the replicas are scheduled, so results are reproducible under any thread
count.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from cgrg.geometry import ball_volume
from cgrg.graphgen import GraphSample, TiltingPotentials, sample_cgrg, sample_tilted
from cgrg.measures import ModelParameters, NeighbourhoodMeasure, empirical_measures
from cgrg.rates import TypicalMeasures, isolated_root, typical_measures

OBSERVABLES = ("isolated_fraction", "edges_per_vertex", "colour_fraction")


def replica_seed(master_seed: int, index: int) -> int:
    """Deterministic 64-bit seed for one replica of a run."""
    seq = np.random.SeedSequence([int(master_seed), int(index)])
    return int(seq.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# observables and events
# ---------------------------------------------------------------------------
def observable_value(sample: GraphSample, observable: str, colour: int = 0) -> float:
    if observable == "isolated_fraction":
        touched = np.zeros(sample.n, dtype=bool)
        if len(sample.edges):
            touched[sample.edges.ravel()] = True
        return float(np.count_nonzero(~touched)) / sample.n
    if observable == "edges_per_vertex":
        return len(sample.edges) / sample.n
    if observable == "colour_fraction":
        return float(np.count_nonzero(sample.colours == colour)) / sample.n
    raise ValueError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")


@dataclass(frozen=True)
class EventSpec:
    """A threshold event on a scalar graph observable."""

    observable: str
    threshold: float
    direction: str = ">="
    colour: int = 0

    def __post_init__(self):
        if self.observable not in OBSERVABLES:
            raise ValueError(
                f"unknown observable {self.observable!r}; choose from {OBSERVABLES}"
            )
        if self.direction not in (">=", "<="):
            raise ValueError(f"direction must be '>=' or '<=', got {self.direction!r}")

    @property
    def name(self) -> str:
        return f"{self.observable} {self.direction} {self.threshold:g}"

    def occurs(self, sample: GraphSample) -> bool:
        v = observable_value(sample, self.observable, self.colour)
        return v >= self.threshold if self.direction == ">=" else v <= self.threshold


@dataclass(frozen=True)
class ExperimentConfig:
    """A reproducible replica experiment: model, vertex counts, seed, optional
    event and tilt.  Identical configs give bit-identical results under any
    thread count."""

    params: ModelParameters
    n_grid: Tuple[int, ...]
    replicas: int
    seed: int
    event: Optional[EventSpec] = None
    tilt: Optional[TiltingPotentials] = None
    threads: int = 1

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"n_grid must be nonempty and strictly increasing: {grid}")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        object.__setattr__(self, "n_grid", grid)


def run_typical_experiment(config: ExperimentConfig) -> List["TypicalRunResult"]:
    """Typical-behaviour statistics at every vertex count in the grid."""
    if config.event is not None:
        raise ValueError("typical-behaviour runs take no event predicate")
    return [
        run_typical(config.params, n, config.replicas, replica_seed(config.seed, j), threads=config.threads)
        for j, n in enumerate(config.n_grid)
    ]


def estimate_tail_experiment(config: ExperimentConfig) -> List["TailEstimate"]:
    """Tail estimates at every vertex count in the grid (fixed tilt)."""
    if config.event is None:
        raise ValueError("tail estimation requires an event predicate")
    return tail_curve(
        config.params,
        config.event,
        config.n_grid,
        config.replicas,
        config.seed,
        tilt_builder=(lambda n: config.tilt),
        threads=config.threads,
    )


# ---------------------------------------------------------------------------
# typical-behaviour experiment
# ---------------------------------------------------------------------------
@dataclass
class TypicalRunResult:
    """Per-replica observables plus pooled comparisons to the typical measures."""

    n: int
    replicas: int
    seed: int
    rows: List[Dict[str, float]]
    mean_isolated: float
    se_isolated: float
    mean_edges_per_vertex: float
    se_edges_per_vertex: float
    tv_degree: float
    tv_neighbourhood: float
    tv_colour: float
    typical: TypicalMeasures


def _typical_replica(args) -> Tuple[int, float, float, np.ndarray, np.ndarray, dict]:
    params, n, master_seed, i = args
    sample = sample_cgrg(n, params, replica_seed(master_seed, i))
    l1, l2, m_meas, deg = empirical_measures(sample)
    iso = float(deg[0])
    epv = len(sample.edges) / n
    atoms = {key: w for key, w in m_meas}
    return i, iso, epv, l1, deg.weights, atoms


def _tv_arrays(p: np.ndarray, q: np.ndarray) -> float:
    m = max(len(p), len(q))
    p = np.pad(np.asarray(p, float), (0, m - len(p)))
    q = np.pad(np.asarray(q, float), (0, m - len(q)))
    return 0.5 * float(np.abs(p - q).sum())


def _tv_atoms(p: Dict, q: NeighbourhoodMeasure) -> float:
    keys = set(p) | {key for key, _ in q}
    return 0.5 * math.fsum(abs(p.get(key, 0.0) - q[key]) for key in keys)


def run_typical(
    params: ModelParameters,
    n: int,
    replicas: int,
    seed: int,
    *,
    threads: int = 1,
) -> TypicalRunResult:
    """Sample `replicas` independent graphs and compare pooled empirical
    measures against the law-of-large-numbers limits."""
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    typ = typical_measures(params)
    jobs = [(params, n, seed, i) for i in range(replicas)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_typical_replica, jobs, chunksize=8))
    else:
        results = [_typical_replica(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    rows = []
    iso = np.empty(replicas)
    epv = np.empty(replicas)
    colour_sum = np.zeros(params.k)
    deg_hists: List[np.ndarray] = []
    m_pool: Dict = {}
    for i, iso_i, epv_i, l1, deg_w, atoms in results:
        iso[i] = iso_i
        epv[i] = epv_i
        colour_sum += l1
        deg_hists.append(deg_w)
        for key, w in atoms.items():
            m_pool[key] = m_pool.get(key, 0.0) + w
        rows.append(
            {
                "replica": i,
                "seed": replica_seed(seed, i),
                "isolated_fraction": iso_i,
                "edges_per_vertex": epv_i,
            }
        )
    deg_len = max(len(h) for h in deg_hists)
    deg_pool = np.zeros(deg_len)
    for h in deg_hists:
        deg_pool[: len(h)] += h
    deg_pool /= replicas
    for key in m_pool:
        m_pool[key] /= replicas
    colour_pool = colour_sum / replicas

    def se(x):
        return float(x.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.inf

    return TypicalRunResult(
        n=n,
        replicas=replicas,
        seed=seed,
        rows=rows,
        mean_isolated=float(iso.mean()),
        se_isolated=se(iso),
        mean_edges_per_vertex=float(epv.mean()),
        se_edges_per_vertex=se(epv),
        tv_degree=_tv_arrays(deg_pool, typ.delta),
        tv_neighbourhood=_tv_atoms(m_pool, typ.mu),
        tv_colour=0.5 * float(np.abs(colour_pool - typ.omega).sum()),
        typical=typ,
    )


# ---------------------------------------------------------------------------
# rare-event tail estimation
# ---------------------------------------------------------------------------
@dataclass
class TailEstimate:
    """One importance-sampling (or plain) estimate of an event probability."""

    n: int
    event: str
    replicas: int
    seed: int
    tilted: bool
    hits: int
    p_hat: float
    std_err: float
    neg_log_rate: float  # -log(p_hat)/n, inf when p_hat == 0
    ess: float  # (sum w)^2 / sum w^2 over all replicas
    flagged: bool  # true when no hits were observed
    rule_of_three: float  # 95% upper bound 3/replicas when hits == 0

    def row(self) -> Dict:
        return asdict(self)


def _tail_replica(args) -> Tuple[int, bool, float]:
    params, n, master_seed, i, event, pots = args
    s = replica_seed(master_seed, i)
    if pots is None:
        sample = sample_cgrg(n, params, s)
        logw = 0.0
    else:
        sample, logw = sample_tilted(n, params, pots, s)
    return i, event.occurs(sample), logw


def estimate_tail(
    params: ModelParameters,
    n: int,
    event: EventSpec,
    replicas: int,
    seed: int,
    *,
    pots: Optional[TiltingPotentials] = None,
    threads: int = 1,
) -> TailEstimate:
    """Unbiased estimate of P{event} at vertex count n.

    With `pots` the graph is drawn from the tilted law and each hit carries
    its importance weight; without, plain Monte Carlo (all weights one).
    """
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    jobs = [(params, n, seed, i, event, pots) for i in range(replicas)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_tail_replica, jobs, chunksize=32))
    else:
        results = [_tail_replica(j) for j in jobs]

    w = np.zeros(replicas)
    x = np.zeros(replicas)
    hits = 0
    for i, hit, logw in results:
        wi = math.exp(logw)
        w[i] = wi
        if hit:
            hits += 1
            x[i] = wi
    p_hat = float(x.mean())
    std_err = float(x.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.inf
    ess = float(w.sum() ** 2 / (w**2).sum()) if w.any() else 0.0
    return TailEstimate(
        n=n,
        event=event.name,
        replicas=replicas,
        seed=seed,
        tilted=pots is not None,
        hits=hits,
        p_hat=p_hat,
        std_err=std_err,
        neg_log_rate=(-math.log(p_hat) / n) if p_hat > 0 else math.inf,
        ess=ess,
        flagged=hits == 0,
        rule_of_three=3.0 / replicas,
    )


def tail_curve(
    params: ModelParameters,
    event: EventSpec,
    n_grid: Sequence[int],
    replicas: int,
    seed: int,
    *,
    tilt_builder: Optional[Callable[[int], Optional[TiltingPotentials]]] = None,
    threads: int = 1,
) -> List[TailEstimate]:
    """Tail estimates across a grid of vertex counts (one tilt per n)."""
    out = []
    for j, n in enumerate(n_grid):
        pots = tilt_builder(n) if tilt_builder is not None else None
        out.append(
            estimate_tail(
                params, n, event, replicas, replica_seed(seed, j), pots=pots, threads=threads
            )
        )
    return out


# ---------------------------------------------------------------------------
# tilt constructors for the standard rare events
# ---------------------------------------------------------------------------
def isolated_fraction_tilt(
    y: float, params: ModelParameters, *, policy: str = "event_typical"
) -> TiltingPotentials:
    """Pair tilt aimed at {isolated fraction >= y} for the one-colour model.

    ``event_typical`` rescales the mean degree to -log(y), which makes the
    tilted typical isolated fraction equal y.  ``rate_optimal`` rescales it
    to the root a(y) from the isolated-vertex rate function, which matches
    the LDP minimizer's conditional mean degree; the event stays rare under
    this tilt, so it needs far more replicas for the same hit count.
    """
    if params.k != 1:
        raise ValueError("isolated-fraction tilt is defined for the one-colour model")
    if not 0.0 < y < 1.0:
        raise ValueError(f"y must lie in (0, 1), got {y}")
    rho_c = params.rho * float(params.C[0, 0])
    if policy == "event_typical":
        a = -math.log(y)
    elif policy == "rate_optimal":
        a, _ = isolated_root(y, float(params.C[0, 0]), params.d)
    else:
        raise ValueError(f"unknown tilt policy {policy!r}")
    g = math.log(a / rho_c)
    return TiltingPotentials.scalar(0.0, g, k=1)


def edges_per_vertex_tilt(x: float, params: ModelParameters) -> TiltingPotentials:
    """Pair tilt making x the tilted typical number of edges per vertex
    for the one-colour model."""
    if params.k != 1:
        raise ValueError("edges-per-vertex tilt is defined for the one-colour model")
    if x <= 0:
        raise ValueError(f"x must be > 0, got {x}")
    rho_c = params.rho * float(params.C[0, 0])
    g = math.log(2.0 * x / rho_c)
    return TiltingPotentials.scalar(0.0, g, k=1)


def colour_fraction_tilt(
    target: np.ndarray, params: ModelParameters
) -> TiltingPotentials:
    """Colour-only tilt (edges untouched) whose tilted colour law is `target`."""
    target = np.asarray(target, dtype=float)
    if target.shape != (params.k,) or np.any(target <= 0):
        raise ValueError("target must be a strictly positive colour law")
    if np.any(params.nu <= 0):
        raise ValueError("colour tilt requires a strictly positive base law")
    f = np.log(target / params.nu)
    return TiltingPotentials(f, np.zeros((params.k, params.k)))


# ---------------------------------------------------------------------------
# analytic diagnostics
# ---------------------------------------------------------------------------
def euler_check(alpha: float, params: ModelParameters, n: int) -> Dict[str, float]:
    """Compare [1 + alpha F(r_n)]^n with its limit exp(alpha rho(d) C)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    F = params.rho * params.C / n
    lhs = (1.0 + alpha * F) ** n
    rhs = np.exp(alpha * params.rho * params.C)
    rel = np.abs(lhs - rhs) / np.abs(rhs)
    return {
        "alpha": alpha,
        "n": n,
        "max_relative_error": float(rel.max()),
        "lhs_max": float(lhs.max()),
        "rhs_max": float(rhs.max()),
    }


def euler_table(
    alpha: float, params: ModelParameters, n_grid: Sequence[int]
) -> List[Dict[str, float]]:
    """Convergence table for the finite-n product versus its exponential limit."""
    return [euler_check(alpha, params, n) for n in n_grid]


def tail_bound_check(
    params: ModelParameters,
    l: float,
    n: int,
    replicas: int,
    seed: int,
    *,
    threads: int = 1,
) -> Dict[str, float]:
    """Check the exponential edge-count bound P{|E| >= n l} <= e^{-n l} e^{n rho c (e-1)}.

    The bound term uses c = max C(a,b); the empirical probability comes from
    plain Monte Carlo on the event {edges per vertex >= l}.
    """
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    event = EventSpec("edges_per_vertex", l, ">=")
    est = estimate_tail(params, n, event, replicas, seed, threads=threads)
    c = float(params.C.max())
    log_bound = n * (params.rho * c * (math.e - 1.0) - l)
    return {
        "n": n,
        "l": l,
        "replicas": replicas,
        "hits": est.hits,
        "p_hat": est.p_hat,
        "rule_of_three": est.rule_of_three,
        "log_bound": log_bound,
        "bound": math.exp(log_bound) if log_bound < 700 else math.inf,
        "satisfied": est.p_hat <= 10.0 * math.exp(min(log_bound, 700.0)),
    }


# ---------------------------------------------------------------------------
# tabular output
# ---------------------------------------------------------------------------
def write_csv(rows: Iterable[Dict], path: str) -> None:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
