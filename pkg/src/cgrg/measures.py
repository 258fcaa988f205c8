"""Finite-measure arithmetic for coloured random geometric graphs.

Measures live on three kinds of finite support:

* colour measures      -- numpy vectors of length k,
* pair measures        -- symmetric k x k numpy matrices,
* neighbourhood measures -- weights on (colour, profile) pairs, where a
  profile counts the neighbours of each colour; stored as a dict keyed by
  ``(colour, profile_tuple)``.

Everything here is a pure function of its inputs; nothing mutates its
arguments.  The conventions ``0*log 0 = 0`` and ``p>0 while q=0 -> +inf``
apply throughout.  Relative entropy of unnormalized finite measures is the
bare sum ``sum p log(p/q)`` with no mass-correction terms: the pair
functional below adds its own mass terms explicitly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Tuple

import numpy as np

from cgrg.geometry import GEOMETRIES, TORUS, ball_volume

Profile = Tuple[int, ...]

#: default absolute per-entry tolerance for consistency classification
CONSISTENCY_TOL = 1e-9

#: adaptive truncation target: truncated-away mass below this is acceptable
TRUNCATION_RESIDUAL = 1e-12


class MeasureError(ValueError):
    """Malformed measure input (mismatched supports, negative mass, ...)."""


class SampleError(ValueError):
    """Malformed graph sample; the message names the offending item."""


# ---------------------------------------------------------------------------
# model parameters
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ModelParameters:
    """Colour alphabet size, dimension, colour law and connection kernel.

    Parameters
    ----------
    k : int
        Colour alphabet size (>= 1).
    d : int
        Spatial dimension (>= 1).
    nu : array_like
        Colour law, probability vector of length k.
    C : array_like
        Connection kernel, symmetric nonnegative k x k matrix, not
        identically zero.  ``C[a, b]`` is the limit of ``n * r_n(a,b)**d``.
    geometry : str
        ``"torus"`` (default) or ``"cube"``.
    """

    k: int
    d: int
    nu: np.ndarray
    C: np.ndarray
    geometry: str = TORUS

    def __post_init__(self):
        if self.k < 1:
            raise MeasureError(f"k must be >= 1, got {self.k}")
        if self.d < 1:
            raise MeasureError(f"d must be >= 1, got {self.d}")
        nu = np.asarray(self.nu, dtype=float).reshape(self.k)
        C = np.asarray(self.C, dtype=float).reshape(self.k, self.k)
        if np.any(nu < 0):
            raise MeasureError("nu has negative entries")
        if abs(nu.sum() - 1.0) > 1e-12:
            raise MeasureError(f"nu sums to {nu.sum()!r}, not 1")
        if np.any(C < 0):
            raise MeasureError("C has negative entries")
        if np.max(np.abs(C - C.T)) > 1e-12:
            raise MeasureError("C is not symmetric")
        if not np.any(C > 0):
            raise MeasureError("C is identically zero")
        if self.geometry not in GEOMETRIES:
            raise MeasureError(f"unknown geometry {self.geometry!r}")
        nu.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "C", C)

    @property
    def rho(self) -> float:
        """Unit-ball volume in dimension d, the scaled edge-intensity constant."""
        return ball_volume(self.d)

    def radii(self, n: int) -> np.ndarray:
        """Connection radii r(a,b) = (C(a,b)/n)**(1/d) at vertex count n."""
        return (self.C / n) ** (1.0 / self.d)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "d": self.d,
            "nu": self.nu.tolist(),
            "C": self.C.tolist(),
            "geometry": self.geometry,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParameters":
        return cls(
            k=int(obj["k"]),
            d=int(obj["d"]),
            nu=np.asarray(obj["nu"], dtype=float),
            C=np.asarray(obj["C"], dtype=float),
            geometry=obj.get("geometry", TORUS),
        )


# ---------------------------------------------------------------------------
# neighbourhood measures and degree distributions
# ---------------------------------------------------------------------------
class NeighbourhoodMeasure:
    """Finite measure on (colour, local colour profile) pairs.

    A profile is a length-k tuple of nonnegative neighbour counts.  Only
    finitely many atoms are stored; missing atoms have weight zero.
    """

    __slots__ = ("k", "atoms")

    def __init__(self, k: int, atoms: Dict[Tuple[int, Profile], float] | None = None):
        self.k = k
        self.atoms: Dict[Tuple[int, Profile], float] = {}
        if atoms:
            for (a, prof), w in atoms.items():
                self.set(a, prof, w)

    def set(self, colour: int, profile: Profile, weight: float) -> None:
        if not 0 <= colour < self.k:
            raise MeasureError(f"colour {colour} outside alphabet of size {self.k}")
        profile = tuple(int(c) for c in profile)
        if len(profile) != self.k or any(c < 0 for c in profile):
            raise MeasureError(f"bad profile {profile} for k={self.k}")
        if weight < 0:
            raise MeasureError(f"negative weight {weight}")
        if weight > 0:
            self.atoms[(colour, profile)] = self.atoms.get((colour, profile), 0.0) + weight

    def __getitem__(self, key: Tuple[int, Profile]) -> float:
        colour, profile = key
        return self.atoms.get((colour, tuple(profile)), 0.0)

    def __iter__(self) -> Iterator[Tuple[Tuple[int, Profile], float]]:
        return iter(self.atoms.items())

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.atoms.values())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NeighbourhoodMeasure)
            and self.k == other.k
            and self.atoms == other.atoms
        )

    def __repr__(self) -> str:
        return f"NeighbourhoodMeasure(k={self.k}, atoms={len(self.atoms)}, mass={self.total_mass:.6g})"


class DegreeDistribution:
    """Probability weights on total degrees {0, 1, ..., K_max}."""

    __slots__ = ("weights",)

    def __init__(self, weights, *, check: bool = True):
        w = np.asarray(weights, dtype=float).ravel()
        if check:
            if np.any(w < 0):
                raise MeasureError("degree weights must be nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise MeasureError(f"degree weights sum to {w.sum()!r}, not 1")
        self.weights = w

    @property
    def k_max(self) -> int:
        return len(self.weights) - 1

    @property
    def mean(self) -> float:
        """First moment, sum of m * weight(m)."""
        return float(np.arange(len(self.weights)) @ self.weights)

    def __getitem__(self, m: int) -> float:
        return float(self.weights[m]) if 0 <= m < len(self.weights) else 0.0

    def __repr__(self) -> str:
        return f"DegreeDistribution(k_max={self.k_max}, mean={self.mean:.6g})"


# ---------------------------------------------------------------------------
# empirical measures
# ---------------------------------------------------------------------------
def _validate_sample(sample) -> None:
    n = sample.n
    edges = np.asarray(sample.edges)
    if len(sample.colours) != n:
        raise SampleError(f"{len(sample.colours)} colours for {n} vertices")
    if edges.size == 0:
        return
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise SampleError("edge list is not a sequence of pairs")
    if edges.min() < 0 or edges.max() >= n:
        bad = edges[(edges < 0).any(axis=1) | (edges >= n).any(axis=1)][0]
        raise SampleError(f"edge {tuple(bad)} references a vertex outside 0..{n - 1}")
    loops = edges[:, 0] == edges[:, 1]
    if loops.any():
        raise SampleError(f"self-loop at vertex {int(edges[loops][0][0])}")
    canon = np.sort(edges, axis=1)
    uniq = np.unique(canon, axis=0)
    if len(uniq) != len(canon):
        seen = set()
        for e in map(tuple, canon):
            if e in seen:
                raise SampleError(f"duplicate edge {e}")
            seen.add(e)


def empirical_measures(sample):
    """Empirical colour / pair / neighbourhood measures and degree histogram.

    Returns
    -------
    (L1, L2, M, D) where L1 is a probability vector over colours, L2 the
    symmetrized pair measure with total mass exactly 2|E|/n, M the empirical
    neighbourhood measure, and D the empirical degree distribution.
    """
    _validate_sample(sample)
    n = sample.n
    k = sample.k
    colours = np.asarray(sample.colours, dtype=np.int64)
    edges = np.asarray(sample.edges, dtype=np.int64).reshape(-1, 2)

    L1 = np.bincount(colours, minlength=k).astype(float) / n

    pair_counts = np.zeros((k, k), dtype=np.int64)
    # neighbour counts per vertex per colour
    nbr = np.zeros((n, k), dtype=np.int64)
    for i, j in edges:
        a, b = colours[i], colours[j]
        pair_counts[a, b] += 1
        pair_counts[b, a] += 1
        nbr[i, b] += 1
        nbr[j, a] += 1
    L2 = pair_counts.astype(float) / n

    M = NeighbourhoodMeasure(k)
    for v in range(n):
        M.set(int(colours[v]), tuple(nbr[v]), 1.0 / n)

    degrees = nbr.sum(axis=1)
    D = DegreeDistribution(np.bincount(degrees, minlength=1).astype(float) / n)
    return L1, L2, M, D


# ---------------------------------------------------------------------------
# relative entropy and the pair functional
# ---------------------------------------------------------------------------
def _entropy_terms(p: np.ndarray, q: np.ndarray) -> float:
    terms = []
    for pi, qi in zip(p.ravel(), q.ravel()):
        if pi == 0.0:
            continue
        if qi == 0.0:
            return math.inf
        terms.append(pi * math.log(pi / qi))
    return math.fsum(terms)


def relative_entropy(p, q) -> float:
    """sum p log(p/q) over the common support descriptor.

    Defined for general finite measures (not only probability measures).
    Returns +inf when p puts mass where q vanishes.
    """
    if isinstance(p, NeighbourhoodMeasure) or isinstance(q, NeighbourhoodMeasure):
        if not (isinstance(p, NeighbourhoodMeasure) and isinstance(q, NeighbourhoodMeasure)):
            raise MeasureError("cannot mix neighbourhood and array measures")
        if p.k != q.k:
            raise MeasureError(f"alphabet mismatch: {p.k} vs {q.k}")
        terms = []
        for key, w in p:
            qw = q[key]
            if qw == 0.0:
                return math.inf
            terms.append(w * math.log(w / qw))
        return math.fsum(terms)

    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise MeasureError(f"support mismatch: shapes {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise MeasureError("measures must be nonnegative")
    return _entropy_terms(p, q)


def h_functional(varpi: np.ndarray, omega: np.ndarray, params: ModelParameters) -> float:
    """Pair-measure functional H(varpi || rho*C w (x) w) + rho*||C w (x) w|| - ||varpi||.

    Nonnegative, and zero exactly at varpi = rho(d) * C(a,b) w(a) w(b).
    Returns +inf when varpi is not absolutely continuous with respect to
    the reference pair measure.
    """
    varpi = np.asarray(varpi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    k = params.k
    if varpi.shape != (k, k) or omega.shape != (k,):
        raise MeasureError(
            f"dimension mismatch: varpi {varpi.shape}, omega {omega.shape}, k={k}"
        )
    ref = params.rho * params.C * np.outer(omega, omega)
    ent = _entropy_terms(varpi, ref)
    if ent == math.inf:
        return math.inf
    return ent + float(ref.sum()) - float(varpi.sum())


# ---------------------------------------------------------------------------
# the product-Poisson measure Q[varpi, mu1]
# ---------------------------------------------------------------------------
@dataclass
class QMeasureResult:
    """Truncated product-Poisson measure plus the mass that fell outside."""

    measure: NeighbourhoodMeasure
    truncated_mass: float
    truncation: int


def _poisson_log_pmf(lam: float, m: int) -> float:
    if lam == 0.0:
        return 0.0 if m == 0 else -math.inf
    return -lam + m * math.log(lam) - math.lgamma(m + 1)


def _poisson_cdf(lam: float, t: int) -> float:
    return math.fsum(math.exp(_poisson_log_pmf(lam, m)) for m in range(t + 1))


def q_measure(varpi: np.ndarray, mu1: np.ndarray, truncation: int) -> QMeasureResult:
    """Product-Poisson measure on (colour, profile) pairs.

    Atom weights are ``mu1(a) * prod_b Poisson(varpi(a,b)/mu1(a))(l(b))`` for
    profiles with every entry <= truncation.  The truncated-away mass is
    reported so callers can tighten the cap.
    """
    varpi = np.asarray(varpi, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    k = len(mu1)
    if varpi.shape != (k, k):
        raise MeasureError(f"varpi shape {varpi.shape} does not match k={k}")
    if truncation < 0:
        raise MeasureError(f"truncation must be >= 0, got {truncation}")
    for a in range(k):
        if mu1[a] == 0.0 and np.any(varpi[a] > 0):
            raise MeasureError(
                f"varpi has mass on colour {a} where mu1({a}) = 0; rate is +inf there"
            )

    out = NeighbourhoodMeasure(k)
    captured = []
    for a in range(k):
        if mu1[a] == 0.0:
            continue
        lam = varpi[a] / mu1[a]
        # per-colour pmf tables up to the cap
        tables = [
            np.array([_poisson_log_pmf(lam[b], m) for m in range(truncation + 1)])
            for b in range(k)
        ]
        log_mu = math.log(mu1[a])
        # enumerate profiles {0..truncation}^k via mixed-radix counting
        profile = [0] * k
        while True:
            lw = log_mu + sum(tables[b][profile[b]] for b in range(k))
            if lw > -745.0:  # exp underflows to 0 below this
                w = math.exp(lw)
                out.set(a, tuple(profile), w)
                captured.append(w)
            idx = 0
            while idx < k:
                profile[idx] += 1
                if profile[idx] <= truncation:
                    break
                profile[idx] = 0
                idx += 1
            if idx == k:
                break
    truncated = 1.0 - math.fsum(captured)
    return QMeasureResult(out, max(truncated, 0.0), truncation)


def q_measure_adaptive(
    varpi: np.ndarray,
    mu1: np.ndarray,
    *,
    initial: int = 8,
    residual: float = TRUNCATION_RESIDUAL,
    max_atoms: int = 4_000_000,
) -> QMeasureResult:
    """Double the truncation cap until the reported residual drops below target."""
    t = max(1, initial)
    while True:
        k = len(np.asarray(mu1))
        if (t + 1) ** k > max_atoms:
            raise MeasureError(
                f"truncation {t} needs more than {max_atoms} atoms at k={k}"
            )
        res = q_measure(varpi, mu1, t)
        if res.truncated_mass < residual:
            return res
        t *= 2


# ---------------------------------------------------------------------------
# marginals and consistency
# ---------------------------------------------------------------------------
def profile_marginals(mu: NeighbourhoodMeasure) -> Tuple[np.ndarray, np.ndarray]:
    """Colour marginal mu1 and the pair recovery H2(b,a) = sum_l l(b) mu(a,l)."""
    k = mu.k
    mu1 = np.zeros(k)
    H2 = np.zeros((k, k))
    for (a, profile), w in mu:
        mu1[a] += w
        for b, count in enumerate(profile):
            if count:
                H2[b, a] += count * w
    return mu1, H2


class Consistency(enum.Enum):
    CONSISTENT = "consistent"
    SUB_CONSISTENT = "sub_consistent"
    INCONSISTENT = "inconsistent"


def check_consistency(
    varpi: np.ndarray, mu: NeighbourhoodMeasure, tol: float = CONSISTENCY_TOL
) -> Consistency:
    """Classify (varpi, mu) by comparing the recovered pair measure entrywise.

    ``consistent`` when H2(mu) = varpi within tol, ``sub_consistent`` when
    H2(mu) <= varpi entrywise with at least one strict gap, ``inconsistent``
    when some entry of H2(mu) exceeds varpi by more than tol.

    Note: the joint-LDP domain condition also names an (undefined) extra
    marginal identity; only the equality relation above is enforced here.
    """
    if tol <= 0:
        raise MeasureError(f"tol must be positive, got {tol}")
    varpi = np.asarray(varpi, dtype=float)
    _, H2 = profile_marginals(mu)
    diff = varpi - H2
    if np.any(diff < -tol):
        return Consistency.INCONSISTENT
    if np.any(diff > tol):
        return Consistency.SUB_CONSISTENT
    return Consistency.CONSISTENT


# ---------------------------------------------------------------------------
# serialization: {support: [...], weights: [...], total_mass: x}
# ---------------------------------------------------------------------------
def _profile_key(profile: Profile) -> list:
    return [f"({b}:{c})" for b, c in enumerate(profile) if c > 0]


def _profile_from_key(key: list, k: int) -> Profile:
    prof = [0] * k
    for item in key:
        b, c = item.strip("()").split(":")
        prof[int(b)] = int(c)
    return tuple(prof)


def measure_to_json(measure) -> dict:
    """Serialize any supported measure to the common JSON schema."""
    if isinstance(measure, NeighbourhoodMeasure):
        support, weights = [], []
        for (a, prof), w in sorted(measure.atoms.items()):
            support.append([a, _profile_key(prof)])
            weights.append(w)
        return {
            "kind": "neighbourhood",
            "k": measure.k,
            "support": support,
            "weights": weights,
            "total_mass": measure.total_mass,
        }
    if isinstance(measure, DegreeDistribution):
        return {
            "kind": "degree",
            "support": list(range(len(measure.weights))),
            "weights": measure.weights.tolist(),
            "total_mass": float(measure.weights.sum()),
        }
    arr = np.asarray(measure, dtype=float)
    if arr.ndim == 1:
        return {
            "kind": "colour",
            "support": list(range(len(arr))),
            "weights": arr.tolist(),
            "total_mass": float(arr.sum()),
        }
    if arr.ndim == 2:
        k = arr.shape[0]
        support = [[a, b] for a in range(k) for b in range(k)]
        return {
            "kind": "pair",
            "support": support,
            "weights": [float(arr[a, b]) for a, b in support],
            "total_mass": float(arr.sum()),
        }
    raise MeasureError(f"cannot serialize measure of type {type(measure)!r}")


def measure_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "colour":
        return np.asarray(obj["weights"], dtype=float)
    if kind == "degree":
        return DegreeDistribution(obj["weights"])
    if kind == "pair":
        k = int(math.isqrt(len(obj["support"])))
        arr = np.zeros((k, k))
        for (a, b), w in zip(obj["support"], obj["weights"]):
            arr[a, b] = w
        return arr
    if kind == "neighbourhood":
        k = int(obj["k"])
        out = NeighbourhoodMeasure(k)
        for (a, key), w in zip(obj["support"], obj["weights"]):
            out.set(int(a), _profile_from_key(key, k), float(w))
        return out
    raise MeasureError(f"unknown measure kind {kind!r}")
