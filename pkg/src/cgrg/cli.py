"""Command-line front end: generate graphs, measure them, evaluate rate
functions, and run verification suites.

Configuration is a schema-versioned JSON document; any key can be overridden
on the command line with a dotted path (``--model.d=3``).  Flags win over the
config file, which wins over built-in defaults, and every command echoes the
effective config it ran with so results are reproducible byte for byte.

Exit codes: 0 success, 2 usage/config error, 3 assertion failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from typing import Dict, List, Optional, Tuple

import numpy as np

from cgrg import mc, rates
from cgrg.geometry import GEOMETRIES, TORUS
from cgrg.graphgen import GraphSample, load_sample, sample_cgrg, save_sample
from cgrg.measures import (
    MeasureError,
    ModelParameters,
    NeighbourhoodMeasure,
    SampleError,
    empirical_measures,
    measure_from_json,
    measure_to_json,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ASSERT = 3
EXIT_IO = 4

THREADS_ENV = "CGRG_THREADS"
SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "model": {
        "k": 1,
        "d": 2,
        "nu": [1.0],
        "C": [[1.0]],
        "geometry": TORUS,
    },
    "experiment": {
        "n": 1000,
        "n_grid": [100, 200, 400, 600],
        "replicas": 100,
        "seed": 0,
        "threads": 0,  # 0 means: use --threads flag or the environment default
        "tilt_policy": "event_typical",
    },
}


class UsageError(ValueError):
    """Bad command line or configuration."""


class AssertionFailure(RuntimeError):
    """A verification-style check failed."""


# ---------------------------------------------------------------------------
# configuration handling
# ---------------------------------------------------------------------------
def _check_keys(obj: dict, template: dict, path: str = "") -> None:
    for key, value in obj.items():
        where = f"{path}.{key}" if path else key
        if key not in template:
            raise UsageError(f"unknown config key {where!r}")
        if isinstance(template[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config key {where!r} must be an object")
            _check_keys(value, template[key], where)


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(cfg: dict, dotted: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    node = cfg
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise UsageError(f"unknown config key {dotted!r}")
        node = node[key]
    if keys[-1] not in node:
        raise UsageError(f"unknown config key {dotted!r}")
    node[keys[-1]] = value


def _parse_overrides(tokens: List[str]) -> List[Tuple[str, str]]:
    """Leftover tokens of the form --a.b=v or --a.b v become config overrides."""
    pairs = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        body = tok[2:]
        if "=" in body:
            dotted, raw = body.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise UsageError(f"flag {tok!r} needs a value")
            dotted, raw = body, tokens[i + 1]
            i += 2
        pairs.append((dotted, raw))
    return pairs


def load_config(path: Optional[str], overrides: List[Tuple[str, str]]) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise IOError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise UsageError("config document must be a JSON object")
        _check_keys(user, DEFAULT_CONFIG)
        version = user.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise UsageError(f"unsupported schema_version {version}")
        cfg = _deep_merge(cfg, user)
    for dotted, raw in overrides:
        _apply_override(cfg, dotted, raw)
    return cfg


def build_params(cfg: dict) -> ModelParameters:
    m = cfg["model"]
    try:
        return ModelParameters(
            k=int(m["k"]),
            d=int(m["d"]),
            nu=np.asarray(m["nu"], dtype=float),
            C=np.asarray(m["C"], dtype=float),
            geometry=m["geometry"],
        )
    except (MeasureError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid model config: {exc}") from exc


def _threads(cfg: dict, flag: Optional[int]) -> int:
    if flag is not None:
        return max(1, flag)
    configured = int(cfg["experiment"].get("threads") or 0)
    if configured > 0:
        return configured
    env = os.environ.get(THREADS_ENV, "")
    return max(1, int(env)) if env.isdigit() and int(env) > 0 else 1


def _emit(payload: dict, out_path: Optional[str] = None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _finite(x: float):
    """JSON-safe number: infinities become strings."""
    if x == math.inf:
        return "+inf"
    if x == -math.inf:
        return "-inf"
    return x


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def cmd_generate(args, cfg: dict) -> int:
    params = build_params(cfg)
    n = int(cfg["experiment"]["n"])
    seed = int(cfg["experiment"]["seed"])
    sample = sample_cgrg(n, params, seed)
    if args.out:
        save_sample(sample, args.out)
    if args.edge_list:
        with open(args.edge_list, "w") as fh:
            fh.write(sample.edge_list_text())
    _emit(
        {
            "command": "generate",
            "effective_config": cfg,
            "n": sample.n,
            "edges": sample.n_edges,
            "edges_per_vertex_doubled": 2.0 * sample.n_edges / sample.n,
            "sample_path": args.out,
        }
    )
    return EXIT_OK


def cmd_measure(args, cfg: dict) -> int:
    sample = load_sample(args.sample)
    l1, l2, m_meas, deg = empirical_measures(sample)
    # the pair measure must carry exactly twice the edge count per vertex
    if float(l2.sum()) * sample.n != 2.0 * sample.n_edges:
        raise AssertionFailure(
            f"pair-measure mass {float(l2.sum()):.17g} does not equal "
            f"2|E|/n = {2.0 * sample.n_edges / sample.n:.17g}; sample is corrupt"
        )
    payload = {
        "command": "measure",
        "sample_path": args.sample,
        "n": sample.n,
        "edges": sample.n_edges,
        "colour_measure": measure_to_json(l1),
        "pair_measure": measure_to_json(l2),
        "neighbourhood_measure": measure_to_json(m_meas),
        "degree_distribution": measure_to_json(deg),
    }
    _emit(payload, args.out)
    return EXIT_OK


def _load_vector(raw: str) -> np.ndarray:
    """Inline JSON array, or @path to a JSON file holding one."""
    if raw.startswith("@"):
        with open(raw[1:]) as fh:
            data = json.load(fh)
    else:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise UsageError(f"not valid JSON: {raw!r}") from exc
    return np.asarray(data, dtype=float)


def cmd_rate(args, cfg: dict) -> int:
    kind = args.kind
    if kind in ("xi1", "eta1"):
        c = args.c if args.c is not None else float(build_params(cfg).C[0, 0])
        d = args.d if args.d is not None else int(cfg["model"]["d"])
        if kind == "xi1":
            if args.y is None:
                raise UsageError("rate xi1 requires --y")
            result = rates.rate_xi1(args.y, c, d)
        else:
            if args.delta is None:
                raise UsageError("rate eta1 requires --delta")
            result = rates.rate_eta1(_load_vector(args.delta), c, d)
    elif kind == "zeta":
        if args.x is None:
            raise UsageError("rate zeta requires --x")
        result = rates.rate_zeta(args.x, build_params(cfg))
    elif kind == "I":
        if args.omega is None or args.varpi is None:
            raise UsageError("rate I requires --omega and --varpi")
        result = rates.rate_I(
            _load_vector(args.omega), _load_vector(args.varpi), build_params(cfg)
        )
    else:  # J
        if args.varpi is None or args.mu is None:
            raise UsageError("rate J requires --varpi and --mu")
        with open(args.mu) as fh:
            mu = measure_from_json(json.load(fh))
        if not isinstance(mu, NeighbourhoodMeasure):
            raise UsageError(f"{args.mu} does not hold a neighbourhood measure")
        result = rates.rate_J(_load_vector(args.varpi), mu, build_params(cfg))
    payload = {
        "command": "rate",
        "kind": kind,
        "value": _finite(result.value),
        "diagnostics": {k: _finite(v) for k, v in result.diagnostics.items()},
    }
    if result.value == math.inf:
        payload["reason"] = "input is outside the finite domain of this rate"
    _emit(payload, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------
def _suite_typical(cfg: dict, threads: int) -> List[dict]:
    params = build_params(cfg)
    exp = cfg["experiment"]
    n, replicas, seed = int(exp["n"]), int(exp["replicas"]), int(exp["seed"])
    run = mc.run_typical(params, n, replicas, seed, threads=threads)
    iso_target = float(run.typical.delta[0])
    epv_target = (n - 1) / (2.0 * n) * float(run.typical.varpi.sum())
    checks = [
        {
            "name": "isolated fraction within 3 se of typical value",
            "passed": abs(run.mean_isolated - iso_target) <= 3 * run.se_isolated,
            "observed": run.mean_isolated,
            "target": iso_target,
            "se": run.se_isolated,
        },
        {
            "name": "edges per vertex within 3 se of exact expectation",
            "passed": abs(run.mean_edges_per_vertex - epv_target)
            <= 3 * run.se_edges_per_vertex,
            "observed": run.mean_edges_per_vertex,
            "target": epv_target,
            "se": run.se_edges_per_vertex,
        },
        {
            "name": "pooled degree histogram within 0.05 TV of typical law",
            "passed": run.tv_degree < 0.05,
            "observed": run.tv_degree,
            "target": 0.05,
        },
    ]
    return checks


def _suite_contraction(cfg: dict, threads: int) -> List[dict]:
    params = build_params(cfg)
    c = float(params.C[0, 0]) if params.k == 1 else 1.0
    d = params.d
    checks = []
    for y in (0.1, 0.3, 0.5, 0.7):
        target = rates.rate_xi1(y, c, d)
        found, minimizer = rates.contraction_minimum(y, c, d)
        reference = rates.conditional_poisson(y, target.diagnostics["root"], len(minimizer) - 1)
        checks.append(
            {
                "name": f"min eta_1 at delta(0)={y} equals xi_1({y}) within 1e-3",
                "passed": abs(found.value - target.value) <= 1e-3,
                "observed": found.value,
                "target": target.value,
            }
        )
        checks.append(
            {
                "name": f"minimizer at delta(0)={y} matches conditional Poisson within 1e-4",
                "passed": bool(np.max(np.abs(minimizer - reference)) <= 1e-4),
                "observed": float(np.max(np.abs(minimizer - reference))),
                "target": 1e-4,
            }
        )
    return checks


def _suite_euler(cfg: dict, threads: int) -> List[dict]:
    checks = []
    n_grid = [100, 1000, 10_000, 100_000]
    for c in (1.0, 2.0):
        params = ModelParameters(
            k=1, d=2, nu=np.array([1.0]), C=np.array([[c]]), geometry=TORUS
        )
        for alpha in (-1.0, 1.0):
            rows = mc.euler_table(alpha, params, n_grid)
            errors = [r["max_relative_error"] for r in rows]
            checks.append(
                {
                    "name": f"euler product error decreasing and <2% at n=1e5 (alpha={alpha}, C={c})",
                    "passed": all(b < a for a, b in zip(errors, errors[1:]))
                    and errors[-1] < 0.02,
                    "observed": errors,
                }
            )
    return checks


def _suite_tail_bound(cfg: dict, threads: int) -> List[dict]:
    params = build_params(cfg)
    exp = cfg["experiment"]
    replicas, seed = int(exp["replicas"]), int(exp["seed"])
    report = mc.tail_bound_check(params, 6.0, 200, replicas, seed, threads=threads)
    return [
        {
            "name": "empirical edge-count tail below 10x the exponential bound",
            "passed": bool(report["satisfied"]),
            "observed": report["p_hat"],
            "target": 10.0 * report["bound"],
            "hits": report["hits"],
            "rule_of_three": report["rule_of_three"],
        }
    ]


def _suite_ldp_slope(cfg: dict, threads: int) -> List[dict]:
    params = build_params(cfg)
    if params.k != 1:
        raise UsageError("the ldp-slope suite needs a one-colour model")
    exp = cfg["experiment"]
    y = 0.3
    target = rates.rate_xi1(y, float(params.C[0, 0]), params.d).value
    event = mc.EventSpec("isolated_fraction", y, ">=")
    pots = mc.isolated_fraction_tilt(y, params, policy=exp["tilt_policy"])
    estimates = mc.tail_curve(
        params,
        event,
        [int(n) for n in exp["n_grid"]],
        int(exp["replicas"]),
        int(exp["seed"]),
        tilt_builder=lambda n: pots,
        threads=threads,
    )
    values = [e.neg_log_rate for e in estimates]
    distances = [abs(v - target) for v in values]
    toward = sum(b < a for a, b in zip(distances, distances[1:]))
    needed = min(3, len(values) - 1)
    final_ok = values[-1] != math.inf and distances[-1] <= 0.3 * target
    return [
        {
            "name": "final -log(p)/n within 30% of the isolated-vertex rate",
            "passed": bool(final_ok),
            "observed": _finite(values[-1]),
            "target": target,
        },
        {
            "name": f"at least {needed} steps move toward the rate",
            "passed": toward >= needed,
            "observed": [_finite(v) for v in values],
            "hits": [e.hits for e in estimates],
        },
    ]


SUITES = {
    "typical": _suite_typical,
    "contraction": _suite_contraction,
    "euler": _suite_euler,
    "tail-bound": _suite_tail_bound,
    "ldp-slope": _suite_ldp_slope,
}


def cmd_verify(args, cfg: dict) -> int:
    threads = _threads(cfg, args.threads)
    checks = SUITES[args.suite](cfg, threads)
    passed = all(c["passed"] for c in checks)
    _emit(
        {
            "command": "verify",
            "suite": args.suite,
            "passed": passed,
            "checks": checks,
            "effective_config": cfg,
        },
        args.out,
    )
    return EXIT_OK if passed else EXIT_ASSERT


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------
def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgrg",
        description="Coloured random geometric graphs: sampling, empirical "
        "measures, large-deviation rate functions, and verification experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="also write the JSON result to this path")
    common.add_argument("--threads", type=int, help="worker process cap")

    p = sub.add_parser("generate", parents=[common], help="sample a graph")
    p.add_argument("--edge-list", help="also write a plain edge list")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("measure", parents=[common], help="empirical measures of a sample")
    p.add_argument("sample", help="GraphSample JSON path")
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("rate", parents=[common], help="evaluate a rate function")
    p.add_argument("kind", choices=["J", "I", "eta1", "xi1", "zeta"])
    p.add_argument("--y", type=float, help="isolated-vertex proportion (xi1)")
    p.add_argument("--x", type=float, help="edges per vertex (zeta)")
    p.add_argument("--c", type=float, help="scalar connection constant")
    p.add_argument("--d", type=int, help="dimension")
    p.add_argument("--delta", help="degree law: JSON array or @file (eta1)")
    p.add_argument("--omega", help="colour law: JSON array or @file (I)")
    p.add_argument("--varpi", help="pair measure: JSON matrix or @file (I, J)")
    p.add_argument("--mu", help="neighbourhood measure JSON file (J)")
    p.set_defaults(fn=cmd_rate)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.set_defaults(fn=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args, leftover = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        overrides = _parse_overrides(leftover)
        cfg = load_config(args.config, overrides)
        cfg["experiment"]["threads"] = _threads(cfg, args.threads)
        return args.fn(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssertionFailure, SampleError) as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MeasureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
