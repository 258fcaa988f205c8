"""Pure-numpy cell-grid edge detection; fallback for the compiled kernel.

Same contract as ``cgrg._grid.grid_edges``: given points in [0,1]^d, colour
indices and a k x k radii matrix, return the canonical (i < j, lexsorted)
edge list of all pairs within their colour-dependent radius.
"""
from __future__ import annotations

import itertools

import numpy as np

BACKEND = "python"


def _canonical(ei: np.ndarray, ej: np.ndarray) -> np.ndarray:
    if len(ei) == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(ei, ej)
    hi = np.maximum(ei, ej)
    order = np.lexsort((hi, lo))
    return np.stack([lo[order], hi[order]], axis=1).astype(np.int64)


def _pair_mask(pa, pb, ca, cb, radii_sq, torus):
    delta = np.abs(pa[:, None, :] - pb[None, :, :])
    if torus:
        delta = np.minimum(delta, 1.0 - delta)
    dist_sq = np.einsum("ijk,ijk->ij", delta, delta)
    return dist_sq <= radii_sq[np.ix_(ca, cb)]


def brute_force_edges(points, colours, radii, torus: bool) -> np.ndarray:
    """O(n^2) all-pairs check; the oracle the grid kernels are tested against."""
    points = np.asarray(points, dtype=float)
    colours = np.asarray(colours, dtype=np.int64)
    n = len(points)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    radii_sq = np.asarray(radii, dtype=float) ** 2
    mask = _pair_mask(points, points, colours, colours, radii_sq, torus)
    iu, ju = np.triu_indices(n, k=1)
    hit = mask[iu, ju]
    return _canonical(iu[hit], ju[hit])


def grid_edges(points, colours, radii, torus: bool) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    colours = np.asarray(colours, dtype=np.int64)
    radii = np.asarray(radii, dtype=float)
    n, d = points.shape
    rmax = float(radii.max())
    if n < 2 or rmax <= 0.0:
        return np.empty((0, 2), dtype=np.int64)

    m = int(1.0 / rmax)
    m = min(m, int(np.ceil((8.0 * n) ** (1.0 / d))))
    if m < 3:
        # grid degenerate at this radius scale; all-pairs is as good
        return brute_force_edges(points, colours, radii, torus)

    radii_sq = radii**2
    cells = np.minimum((points * m).astype(np.int64), m - 1)
    strides = m ** np.arange(d)
    cell_id = cells @ strides
    order = np.argsort(cell_id, kind="stable")
    sorted_ids = cell_id[order]

    occupied, starts = np.unique(sorted_ids, return_index=True)
    starts = np.append(starts, n)
    members = {int(c): order[starts[t] : starts[t + 1]] for t, c in enumerate(occupied)}

    offsets = list(itertools.product((-1, 0, 1), repeat=d))
    ei_parts, ej_parts = [], []
    for c in occupied:
        idx_a = members[int(c)]
        digits = [(int(c) // int(m**axis)) % m for axis in range(d)]
        for off in offsets:
            nb_digits = []
            valid = True
            for axis in range(d):
                v = digits[axis] + off[axis]
                if torus:
                    v %= m
                elif not 0 <= v < m:
                    valid = False
                    break
                nb_digits.append(v)
            if not valid:
                continue
            nb = sum(v * int(m**axis) for axis, v in enumerate(nb_digits))
            if nb == int(c):
                if any(off):
                    continue  # degenerate wrap; excluded by the m >= 3 guard
                mask = _pair_mask(
                    points[idx_a], points[idx_a], colours[idx_a], colours[idx_a], radii_sq, torus
                )
                iu, ju = np.triu_indices(len(idx_a), k=1)
                hit = mask[iu, ju]
                ei_parts.append(idx_a[iu[hit]])
                ej_parts.append(idx_a[ju[hit]])
            elif nb > int(c) and nb in members:
                idx_b = members[nb]
                mask = _pair_mask(
                    points[idx_a], points[idx_b], colours[idx_a], colours[idx_b], radii_sq, torus
                )
                ia, ib = np.nonzero(mask)
                ei_parts.append(idx_a[ia])
                ej_parts.append(idx_b[ib])

    if not ei_parts:
        return np.empty((0, 2), dtype=np.int64)
    return _canonical(np.concatenate(ei_parts), np.concatenate(ej_parts))
