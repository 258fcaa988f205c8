"""Coloured random geometric graphs in the near-intermediate regime:
sampling, empirical measures, large-deviation rate functions, and Monte
Carlo verification experiments."""

from cgrg.geometry import CUBE, GEOMETRIES, TORUS, ball_volume
from cgrg.graphgen import (
    GraphSample,
    SampleSpaceError,
    TiltingPotentials,
    derive_rng,
    load_sample,
    log_importance_weight,
    pair_distance_cdf,
    sample_cgrg,
    sample_tilted,
    save_sample,
)
from cgrg.grid import BACKEND, brute_force_edges, find_edges, find_edges_python
from cgrg.measures import (
    Consistency,
    DegreeDistribution,
    MeasureError,
    ModelParameters,
    NeighbourhoodMeasure,
    QMeasureResult,
    SampleError,
    check_consistency,
    empirical_measures,
    h_functional,
    measure_from_json,
    measure_to_json,
    profile_marginals,
    q_measure,
    q_measure_adaptive,
    relative_entropy,
)
from cgrg.rates import (
    RateResult,
    TypicalMeasures,
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
from cgrg.mc import (
    EventSpec,
    ExperimentConfig,
    TailEstimate,
    TypicalRunResult,
    colour_fraction_tilt,
    edges_per_vertex_tilt,
    estimate_tail,
    euler_check,
    euler_table,
    isolated_fraction_tilt,
    run_typical,
    tail_bound_check,
    tail_curve,
)

__version__ = "1.0.0"
