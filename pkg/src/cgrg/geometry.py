"""Geometric primitives shared by the samplers and the rate functions.

The unit-ball volume is the single constant tying radii to limiting edge
intensities: for a connection radius r on the d-torus, the probability that
two independent uniform points are within distance r is exactly
``ball_volume(d) * r**d`` whenever r <= 1/2.
"""
from __future__ import annotations

import math

import numpy as np

TORUS = "torus"
CUBE = "cube"
GEOMETRIES = (TORUS, CUBE)


def ball_volume(d: int) -> float:
    """Volume of the d-dimensional unit ball, pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def torus_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean distance on the unit torus, coordinates wrapped per axis.

    Accepts broadcastable arrays whose last axis is the spatial dimension.
    """
    delta = np.abs(np.asarray(x) - np.asarray(y))
    delta = np.minimum(delta, 1.0 - delta)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def cube_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Plain Euclidean distance (no wrap-around)."""
    delta = np.asarray(x) - np.asarray(y)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def point_distance(x: np.ndarray, y: np.ndarray, geometry: str) -> np.ndarray:
    if geometry == TORUS:
        return torus_distance(x, y)
    if geometry == CUBE:
        return cube_distance(x, y)
    raise ValueError(f"unknown geometry {geometry!r}")
