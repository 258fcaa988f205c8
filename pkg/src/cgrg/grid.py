"""Backend selection for edge detection: compiled kernel when built, numpy otherwise."""
from __future__ import annotations

import numpy as np

from cgrg import _grid_py
from cgrg.geometry import GEOMETRIES, TORUS

try:
    from cgrg import _grid as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    _impl = _grid_py
    BACKEND = "python"


def _prepare(points, colours, radii, geometry):
    if geometry not in GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}; choose from {GEOMETRIES}")
    return (
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(colours, dtype=np.int64),
        np.ascontiguousarray(radii, dtype=np.float64),
        geometry == TORUS,
    )


def find_edges(points, colours, radii, geometry: str) -> np.ndarray:
    """Canonical edge list of all pairs within their colour-pair radius."""
    return _impl.grid_edges(*_prepare(points, colours, radii, geometry))


def find_edges_python(points, colours, radii, geometry: str) -> np.ndarray:
    """Force the pure-numpy backend (used by the backend benchmark)."""
    return _grid_py.grid_edges(*_prepare(points, colours, radii, geometry))


def brute_force_edges(points, colours, radii, geometry: str) -> np.ndarray:
    """O(n^2) reference edge detection; the oracle for the grid kernels."""
    return _grid_py.brute_force_edges(*_prepare(points, colours, radii, geometry))
