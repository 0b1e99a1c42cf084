"""Tensor estimation from diffusion-weighted signals.

The generalized Stejskal-Tanner relation makes log signal attenuation linear
in the tensor's unique coefficients: ``(log s0 - log S_k) / b`` equals the
diffusivity of the tensor along gradient direction ``g_k``.  With at least
``N_l`` well-spread directions the coefficients follow from one linear
least-squares solve per site.  No positivity constraint is imposed on the
fit; directions with apparent negative diffusivity (``S_k > s0``, routine
under noise) are handled like any other row.

Signal files are plain text: a header line ``order K b s0`` followed by one
line per site, ``x y S_1 ... S_K``.  Direction files hold one unit vector
per line.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError, FieldFormatError, NormalizationError
from .tensors import SymmetricTensor, direction_monomials, unique_count

_FMT = "{:.12e}"


@dataclass(frozen=True)
class GradientScheme:
    """Acquisition geometry: unit gradient directions, weighting ``b``, baseline ``s0``."""

    directions: np.ndarray
    b: float
    s0: float

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        if dirs.ndim != 2 or dirs.shape[1] != 3:
            raise ValueError(f"directions must be (K, 3), got {dirs.shape}")
        nrm = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(nrm - 1.0) > 1e-9):
            raise NormalizationError("every gradient direction must be unit length within 1e-9")
        if self.b <= 0 or self.s0 <= 0:
            raise ValueError("b and s0 must be positive")
        object.__setattr__(self, "directions", dirs.copy())

    @property
    def n_directions(self):
        return self.directions.shape[0]


def fibonacci_directions(n):
    """A deterministic quasi-uniform set of ``n`` unit vectors on the sphere."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def design_matrix(scheme, order):
    """Least-squares design: row ``k`` maps coefficients to the diffusivity at ``g_k``."""
    return direction_monomials(scheme.directions, order)


def synthesize_signals(tensor, scheme):
    """Noiseless forward model: ``S_k = s0 * exp(-b * D(g_k))``."""
    profile = design_matrix(scheme, tensor.order) @ tensor.coeffs
    return scheme.s0 * np.exp(-scheme.b * profile)


def fit_hot(signals, scheme, order):
    """Least-squares tensor fit from one site's signals.

    Requires ``K >= N_l`` directions, all signals positive (their logarithm
    is taken), and a full-column-rank design; rank deficiency raises
    :class:`DegenerateDesignError` naming the shortfall.
    """
    signals = np.asarray(signals, dtype=np.float64)
    n_l = unique_count(order)
    k = scheme.n_directions
    if signals.shape != (k,):
        raise ValueError(f"expected {k} signals, got shape {signals.shape}")
    if k < n_l:
        raise ValueError(f"order {order} needs at least {n_l} directions, got {k}")
    if np.any(signals <= 0) or not np.all(np.isfinite(signals)):
        raise ValueError("signals must be positive and finite")
    design = design_matrix(scheme, order)
    y = (math.log(scheme.s0) - np.log(signals)) / scheme.b
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < n_l:
        raise DegenerateDesignError(
            f"design matrix rank {rank} < {n_l}: gradient directions are degenerate "
            f"for order {order}"
        )
    return SymmetricTensor(order, coeffs)


def write_directions(path, directions):
    dirs = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    with open(path, "w") as fh:
        for g in dirs:
            fh.write(" ".join(_FMT.format(v) for v in g) + "\n")


def read_directions(path):
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise FieldFormatError(f"{path}:{ln}: expected 3 components, got {len(parts)}")
            rows.append([float(p) for p in parts])
    if not rows:
        raise FieldFormatError(f"{path}: no directions found")
    return np.array(rows)


def write_signals(path, order, coords, signals, scheme):
    """Write a signal file: header ``order K b s0`` then ``x y S_1 ... S_K`` rows."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if signals.shape != (coords.shape[0], scheme.n_directions):
        raise ValueError(
            f"signals must be ({coords.shape[0]}, {scheme.n_directions}), got {signals.shape}"
        )
    with open(path, "w") as fh:
        fh.write(
            f"{order} {scheme.n_directions} "
            + _FMT.format(scheme.b) + " " + _FMT.format(scheme.s0) + "\n"
        )
        for z, s in zip(coords, signals):
            fields = [_FMT.format(z[0]), _FMT.format(z[1])]
            fields += [_FMT.format(v) for v in s]
            fh.write(" ".join(fields) + "\n")


def read_signals(path):
    """Parse a signal file; returns ``(order, coords, signals, b, s0)``."""
    with open(path) as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise FieldFormatError(f"{path}: empty signal file")
    head = lines[0].split()
    if len(head) != 4:
        raise FieldFormatError(
            f"{path}: header must be 'order K b s0', got {len(head)} fields"
        )
    try:
        order, k = int(head[0]), int(head[1])
        b, s0 = float(head[2]), float(head[3])
    except ValueError as exc:
        raise FieldFormatError(f"{path}: bad header: {exc}") from exc
    coords, signals = [], []
    for ln, line in enumerate(lines[1:], 2):
        parts = line.split()
        if len(parts) != 2 + k:
            raise FieldFormatError(
                f"{path}:{ln}: expected {2 + k} fields, got {len(parts)}"
            )
        vals = [float(p) for p in parts]
        coords.append(vals[:2])
        signals.append(vals[2:])
    if not coords:
        raise FieldFormatError(f"{path}: no signal rows")
    return order, np.array(coords), np.array(signals), b, s0
