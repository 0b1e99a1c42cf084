"""Reference interpolators: component-wise bilinear and log-Euclidean.

Direct interpolation applies bilinear weights to each unique coefficient
independently and works for any order; it is exact at grid nodes but convex
weights cannot rescue indefinite inputs, and noisy fits do produce them.
Log-Euclidean interpolation (rank 2 only) maps the four corner matrices
through the matrix logarithm, interpolates there, and maps back, so its
output is always symmetric positive definite.  Eigenvalues are clamped to a
small floor before the logarithm because fitted tensors can be indefinite;
every clamp is logged.

Queries must lie inside the training grid's bounding box: these are
interpolators, never extrapolators.
"""

import logging

import numpy as np

from .errors import InvalidOrderError, OutOfDomainError
from .tensors import SymmetricTensor

logger = logging.getLogger(__name__)

#: eigenvalue floor applied before the matrix logarithm
CLAMP_FLOOR = 1e-6

_EDGE_TOL = 1e-12


def _cell_weights(field, z_star):
    """Corner site indices and bilinear weights for one query point."""
    xs, ys = field.grid_axes()
    nx = xs.size
    x, y = float(z_star[0]), float(z_star[1])
    if not (
        xs[0] - _EDGE_TOL <= x <= xs[-1] + _EDGE_TOL
        and ys[0] - _EDGE_TOL <= y <= ys[-1] + _EDGE_TOL
    ):
        raise OutOfDomainError(
            f"query ({x:g}, {y:g}) lies outside the grid box "
            f"[{xs[0]:g}, {xs[-1]:g}] x [{ys[0]:g}, {ys[-1]:g}]"
        )
    ix = min(max(int(np.searchsorted(xs, x, side="right")) - 1, 0), nx - 2)
    iy = min(max(int(np.searchsorted(ys, y, side="right")) - 1, 0), ys.size - 2)
    u = (x - xs[ix]) / (xs[ix + 1] - xs[ix])
    v = (y - ys[iy]) / (ys[iy + 1] - ys[iy])
    u = min(max(u, 0.0), 1.0)
    v = min(max(v, 0.0), 1.0)
    corners = (
        iy * nx + ix,
        iy * nx + ix + 1,
        (iy + 1) * nx + ix,
        (iy + 1) * nx + ix + 1,
    )
    weights = (
        (1.0 - u) * (1.0 - v),
        u * (1.0 - v),
        (1.0 - u) * v,
        u * v,
    )
    return corners, weights


def direct_interpolate(field, z_star):
    """Bilinear interpolation of each unique coefficient independently."""
    corners, weights = _cell_weights(field, z_star)
    coeffs = sum(w * field.coeffs[c] for c, w in zip(corners, weights))
    return SymmetricTensor(field.order, coeffs)


def spd_log(m):
    """Matrix logarithm of a symmetric positive definite 3x3 matrix.

    Eigenvalues below :data:`CLAMP_FLOOR` are clamped up to it (and logged):
    indefinite matrices arise from noisy tensor fits and the logarithm needs
    a positive spectrum.
    """
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite")
    vals, vecs = np.linalg.eigh(m)
    if vals[0] < CLAMP_FLOOR:
        logger.warning(
            "clamping %d eigenvalue(s) (min %.3e) to %.1e before matrix log",
            int(np.sum(vals < CLAMP_FLOOR)), vals[0], CLAMP_FLOOR,
        )
        vals = np.maximum(vals, CLAMP_FLOOR)
    return (vecs * np.log(vals)) @ vecs.T


def spd_exp(s):
    """Matrix exponential of a symmetric 3x3 matrix (always SPD)."""
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("matrix must be finite")
    vals, vecs = np.linalg.eigh(s)
    return (vecs * np.exp(vals)) @ vecs.T


def log_euclidean_interpolate(field, z_star):
    """Bilinear interpolation of matrix logarithms, mapped back by the exponential."""
    if field.order != 2:
        raise InvalidOrderError(
            f"log-Euclidean interpolation needs a rank-2 field, got order {field.order}"
        )
    corners, weights = _cell_weights(field, z_star)
    acc = np.zeros((3, 3))
    for c, w in zip(corners, weights):
        acc += w * spd_log(SymmetricTensor(2, field.coeffs[c]).as_matrix())
    return SymmetricTensor.from_matrix(spd_exp(acc))
