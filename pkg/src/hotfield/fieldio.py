"""Text file formats for tensor fields, site lists, and prediction spreads.

A field file starts with ``HOTFIELD v1 order=<l> nx=<nx> ny=<ny>`` and holds
one line per site, ``x y c_1 ... c_{N_l}``, with coefficients in canonical
order and sites in raster order (x varying fastest).  Numbers are written
with 13 significant digits, which round-trips beyond 12 significant digits
and makes re-written files byte-identical -- downsampling a file and diffing
against the source shows only removed lines.

Scattered site sets (e.g. predictions at held-out positions) reuse the same
format with ``ny=1`` and ``nx`` equal to the number of sites.
"""

import math

import numpy as np

from .errors import FieldFormatError
from .tensors import TensorField, unique_count

_FMT = "{:.12e}"

FIELD_MAGIC = "HOTFIELD"
FIELD_VERSION = "v1"


def format_value(v):
    """Canonical decimal rendering used by every writer in the package."""
    if not math.isfinite(v):
        raise ValueError(f"cannot serialize non-finite value {v!r}")
    return _FMT.format(v)


def write_field(path, field):
    """Write a tensor field; scattered fields are stored as an Nx1 grid."""
    nx, ny = field.grid_shape if field.grid_shape else (field.n_sites, 1)
    with open(path, "w") as fh:
        fh.write(f"{FIELD_MAGIC} {FIELD_VERSION} order={field.order} nx={nx} ny={ny}\n")
        for z, row in zip(field.coords, field.coeffs):
            cells = [format_value(z[0]), format_value(z[1])]
            cells += [format_value(c) for c in row]
            fh.write(" ".join(cells) + "\n")


def read_field(path):
    """Parse a field file back into a :class:`TensorField`."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise FieldFormatError(f"{path}: empty field file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != FIELD_MAGIC or head[1] != FIELD_VERSION:
        raise FieldFormatError(
            f"{path}: expected header '{FIELD_MAGIC} {FIELD_VERSION} order=.. nx=.. ny=..'"
        )
    try:
        meta = dict(item.split("=", 1) for item in head[2:])
        order = int(meta["order"])
        nx, ny = int(meta["nx"]), int(meta["ny"])
    except (ValueError, KeyError) as exc:
        raise FieldFormatError(f"{path}: malformed header: {exc}") from exc
    if nx < 1 or ny < 1:
        raise FieldFormatError(f"{path}: bad grid dims {nx}x{ny}")
    n_l = unique_count(order)
    if len(lines) - 1 != nx * ny:
        raise FieldFormatError(
            f"{path}: header promises {nx * ny} sites, file has {len(lines) - 1}"
        )
    coords = np.empty((nx * ny, 2))
    coeffs = np.empty((nx * ny, n_l))
    for i, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != 2 + n_l:
            raise FieldFormatError(
                f"{path}:{i + 2}: expected {2 + n_l} fields for order {order}, "
                f"got {len(parts)}"
            )
        try:
            vals = np.array([float(p) for p in parts])
        except ValueError as exc:
            raise FieldFormatError(f"{path}:{i + 2}: {exc}") from exc
        coords[i] = vals[:2]
        coeffs[i] = vals[2:]
    grid_shape = (nx, ny) if ny > 1 else None
    return TensorField(order, coords, coeffs, grid_shape=grid_shape)


def downsample_by_two(field):
    """Keep the nodes with even grid indices along both axes.

    Coordinates are preserved, so the result is a coarser grid embedded in
    the same normalized frame; output dims are ``ceil(n/2)`` per axis.
    """
    if field.grid_shape is None:
        raise FieldFormatError("downsampling needs a gridded field")
    nx, ny = field.grid_shape
    if nx < 3 or ny < 3:
        raise FieldFormatError(f"grid {nx}x{ny} too small to downsample (need >= 3)")
    keep_x = np.arange(0, nx, 2)
    keep_y = np.arange(0, ny, 2)
    idx = (keep_y[:, None] * nx + keep_x[None, :]).reshape(-1)
    return TensorField(
        field.order,
        field.coords[idx],
        field.coeffs[idx],
        grid_shape=(keep_x.size, keep_y.size),
    )


def write_sites(path, coords):
    """Write a plain site list: one ``x y`` pair per line."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    with open(path, "w") as fh:
        for z in coords:
            fh.write(format_value(z[0]) + " " + format_value(z[1]) + "\n")


def read_sites(path):
    """Read target sites from a plain ``x y`` list or from a field file."""
    with open(path) as fh:
        first = fh.readline()
    if first.startswith(FIELD_MAGIC):
        return read_field(path).coords
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise FieldFormatError(f"{path}:{ln}: expected 'x y', got {len(parts)} fields")
            rows.append([float(p) for p in parts])
    if not rows:
        raise FieldFormatError(f"{path}: no sites found")
    return np.array(rows)


def write_uncertainty(path, coords, spread):
    """Sidecar for probabilistic predictions: ``x y spread`` per site."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    spread = np.asarray(spread, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"HOTUNC {FIELD_VERSION} n={coords.shape[0]}\n")
        for z, s in zip(coords, spread):
            fh.write(
                format_value(z[0]) + " " + format_value(z[1]) + " " + format_value(s) + "\n"
            )


def read_uncertainty(path):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("HOTUNC"):
        raise FieldFormatError(f"{path}: not an uncertainty sidecar")
    rows = [[float(p) for p in line.split()] for line in lines[1:]]
    arr = np.array(rows)
    return arr[:, :2], arr[:, 2]
