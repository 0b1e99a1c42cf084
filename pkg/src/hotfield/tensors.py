"""Symmetric higher-order tensor algebra over dimension 3.

A fully symmetric tensor of even order ``l`` (2, 4, or 6 here) is determined
by its unique components, one per exponent triple ``(i, j, k)`` with
``i + j + k = l``: the component of index tuples containing ``i`` x-indices,
``j`` y-indices, and ``k`` z-indices.  There are ``N_l = (l+1)(l+2)/2`` such
triples.  We store tensors as length-``N_l`` coefficient vectors in a fixed
canonical order (graded lexicographic, x before y before z, so rank-2 reads
``xx, xy, xz, yy, yz, zz``), and weight each coefficient by its multinomial
multiplicity ``l!/(i! j! k!)`` whenever a sum over the full ``3**l`` array is
needed.

Dense ``(3,)*l`` arrays (at most 729 entries) are materialized only for mode
products; everything else works on the unique coefficients.
"""

import math
from itertools import product

import numpy as np

from .errors import (
    AsymmetryError,
    InvalidOrderError,
    NormalizationError,
    TensorMismatchError,
)

SUPPORTED_ORDERS = (2, 4, 6)

#: tolerance used when checking that direction vectors are unit length
UNIT_NORM_TOL = 1e-9

#: tolerance used when collapsing a full array back to unique coefficients
SYMMETRY_TOL = 1e-9


def unique_count(order):
    """Number of unique components of a symmetric tensor of ``order``."""
    return (order + 1) * (order + 2) // 2


def _check_order(order):
    if order not in SUPPORTED_ORDERS:
        raise InvalidOrderError(
            f"tensor order must be one of {SUPPORTED_ORDERS} (even), got {order!r}"
        )


def unique_exponents(order):
    """Canonical enumeration of exponent triples for ``order``.

    Returns the list of ``(i, j, k)`` with ``i + j + k = order``, ordered
    graded-lexicographically with x highest: ``(l,0,0), (l-1,1,0), ...,
    (0,0,l)``.  This fixes the coefficient layout used everywhere (files,
    design matrices, vectorized priors).
    """
    _check_order(order)
    return [
        (i, j, order - i - j)
        for i in range(order, -1, -1)
        for j in range(order - i, -1, -1)
    ]


def multiplicity(exponents):
    """Number of index tuples sharing one unique component.

    For the triple ``(i, j, k)`` this is the multinomial coefficient
    ``(i+j+k)! / (i! j! k!)``: how many arrangements of ``i`` x's, ``j`` y's,
    and ``k`` z's exist in the full symmetric array.
    """
    i, j, k = exponents
    if i < 0 or j < 0 or k < 0:
        raise ValueError(f"exponents must be non-negative, got {exponents!r}")
    return math.factorial(i + j + k) // (
        math.factorial(i) * math.factorial(j) * math.factorial(k)
    )


def _build_tables(order):
    exps = unique_exponents(order)
    index_of = {e: u for u, e in enumerate(exps)}
    mult = np.array([multiplicity(e) for e in exps], dtype=np.float64)
    # flat index of the full (3,)*order array -> unique coefficient index
    full_to_unique = np.empty(3**order, dtype=np.intp)
    for flat, axes in enumerate(product(range(3), repeat=order)):
        e = (axes.count(0), axes.count(1), axes.count(2))
        full_to_unique[flat] = index_of[e]
    gather = np.zeros((3**order, len(exps)))
    gather[np.arange(3**order), full_to_unique] = 1.0
    return exps, mult, full_to_unique, gather


_TABLES = {order: _build_tables(order) for order in SUPPORTED_ORDERS}


def multiplicities(order):
    """Multiplicity of each canonical coefficient, as a float array."""
    _check_order(order)
    return _TABLES[order][1]


def exponent_array(order):
    """Canonical exponent triples as an ``(N_l, 3)`` integer array."""
    _check_order(order)
    return np.array(_TABLES[order][0], dtype=np.intp)


class SymmetricTensor:
    """One symmetric tensor of even order, stored as unique coefficients.

    Parameters
    ----------
    order : int
        Tensor order, one of 2, 4, 6.
    coeffs : array_like
        Length ``N_l`` coefficient vector in canonical order.
    """

    __slots__ = ("order", "coeffs")

    def __init__(self, order, coeffs):
        _check_order(order)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        n = unique_count(order)
        if coeffs.shape != (n,):
            raise TensorMismatchError(
                f"order-{order} tensor needs {n} coefficients, got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("tensor coefficients must be finite")
        self.order = order
        self.coeffs = coeffs.copy()

    @classmethod
    def zeros(cls, order):
        return cls(order, np.zeros(unique_count(order)))

    @classmethod
    def from_matrix(cls, m):
        """Build a rank-2 tensor from a symmetric 3x3 matrix."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise TensorMismatchError(f"expected a 3x3 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(m))):
            raise AsymmetryError("matrix is not symmetric")
        sym = 0.5 * (m + m.T)
        return cls(2, [sym[0, 0], sym[0, 1], sym[0, 2], sym[1, 1], sym[1, 2], sym[2, 2]])

    def as_matrix(self):
        """View a rank-2 tensor as its symmetric 3x3 matrix."""
        if self.order != 2:
            raise InvalidOrderError(f"as_matrix needs order 2, got {self.order}")
        xx, xy, xz, yy, yz, zz = self.coeffs
        return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])

    def full(self):
        """Expand to the dense ``(3,)*order`` symmetric array."""
        f2u = _TABLES[self.order][2]
        return self.coeffs[f2u].reshape((3,) * self.order)

    @classmethod
    def from_full(cls, arr, tol=SYMMETRY_TOL):
        """Collapse a dense array back to unique coefficients.

        Entries belonging to the same unique component are averaged.  If any
        entry deviates from its class mean by more than ``tol`` (relative to
        the array magnitude) the input was not symmetric and an
        :class:`AsymmetryError` is raised.
        """
        arr = np.asarray(arr, dtype=np.float64)
        order = arr.ndim
        _check_order(order)
        if arr.shape != (3,) * order:
            raise TensorMismatchError(f"expected shape {(3,) * order}, got {arr.shape}")
        _, mult, f2u, _ = _TABLES[order]
        flat = arr.reshape(-1)
        means = np.bincount(f2u, weights=flat, minlength=mult.size) / mult
        drift = np.max(np.abs(flat - means[f2u]))
        scale = max(1.0, float(np.max(np.abs(flat))) if flat.size else 1.0)
        if drift > tol * scale:
            raise AsymmetryError(
                f"array deviates from symmetry by {drift:.3e} (tolerance {tol * scale:.3e})"
            )
        return cls(order, means)

    def __repr__(self):
        return f"SymmetricTensor(order={self.order}, coeffs={self.coeffs!r})"


def frobenius_distance(a, b):
    """Frobenius distance between two tensors of equal order.

    Square root of the sum of squared component differences over all
    ``3**order`` entries, computed with multiplicity weights on the unique
    coefficients.
    """
    if a.order != b.order:
        raise TensorMismatchError(
            f"cannot compare tensors of order {a.order} and {b.order}"
        )
    mult = _TABLES[a.order][1]
    d = a.coeffs - b.coeffs
    return float(np.sqrt(np.sum(mult * d * d)))


def frobenius_norm(t):
    """Frobenius norm of a tensor (distance to the zero tensor)."""
    mult = _TABLES[t.order][1]
    return float(np.sqrt(np.sum(mult * t.coeffs * t.coeffs)))


def frobenius_distance_rows(coeffs_a, coeffs_b, order):
    """Row-wise Frobenius distances between two ``(N, N_l)`` coefficient arrays."""
    _check_order(order)
    mult = _TABLES[order][1]
    d = np.asarray(coeffs_a) - np.asarray(coeffs_b)
    return np.sqrt((mult * d * d).sum(axis=-1))


def _check_unit(g):
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (3,):
        raise NormalizationError(f"direction must be a 3-vector, got shape {g.shape}")
    nrm = float(np.linalg.norm(g))
    if abs(nrm - 1.0) > UNIT_NORM_TOL:
        raise NormalizationError(f"direction norm {nrm!r} is not 1 within {UNIT_NORM_TOL}")
    return g


def direction_monomials(dirs, order):
    """Monomial rows mapping unique coefficients to diffusivity values.

    For each unit direction ``g`` the row holds
    ``multiplicity(e) * g_x**i * g_y**j * g_z**k`` over the canonical triples
    ``e = (i, j, k)``, so that ``row @ coeffs`` equals the diffusivity
    function of the tensor at ``g``.  Shape ``(len(dirs), N_l)``.
    """
    _check_order(order)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    exps = exponent_array(order)
    mult = _TABLES[order][1]
    powers = (
        dirs[:, 0:1] ** exps[:, 0]
        * dirs[:, 1:2] ** exps[:, 1]
        * dirs[:, 2:3] ** exps[:, 2]
    )
    return mult * powers


def evaluate_diffusivity(t, g):
    """Diffusivity function of tensor ``t`` along the unit direction ``g``.

    Equals the full nested sum of components against the order-fold outer
    power of ``g``; raises :class:`NormalizationError` if ``g`` is not unit
    length within ``1e-9``.
    """
    g = _check_unit(g)
    row = direction_monomials(g[None, :], t.order)[0]
    return float(row @ t.coeffs)


def diffusivity_profile(t, dirs):
    """Diffusivity of ``t`` along each unit row of ``dirs`` (shape ``(M, 3)``)."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    nrm = np.linalg.norm(dirs, axis=1)
    if np.any(np.abs(nrm - 1.0) > UNIT_NORM_TOL):
        raise NormalizationError("all directions must be unit length within 1e-9")
    return direction_monomials(dirs, t.order) @ t.coeffs


def mode_product(full, mode, matrix):
    """Contract one mode of a dense tensor array against a 3x3 matrix.

    ``mode`` is 1-based.  The result has the contracted index replaced by the
    matrix row index: ``out[..., j, ...] = sum_i full[..., i, ...] * matrix[j, i]``.
    """
    full = np.asarray(full, dtype=np.float64)
    matrix = np.asarray(matrix, dtype=np.float64)
    if not 1 <= mode <= full.ndim:
        raise ValueError(f"mode {mode} out of range for an order-{full.ndim} tensor")
    if matrix.shape != (3, 3):
        raise TensorMismatchError(f"factor matrix must be 3x3, got {matrix.shape}")
    out = np.tensordot(full, matrix, axes=([mode - 1], [1]))
    return np.moveaxis(out, -1, mode - 1)


def tucker_reconstruct(core, a):
    """Apply the same 3x3 factor matrix to every mode of ``core``.

    Expands the core tensor to its dense array, contracts each of the
    ``order`` modes against ``a``, and collapses back to unique coefficients
    (the result of an equal-factor product on a symmetric core is symmetric
    up to round-off; the collapse re-symmetrizes by averaging and guards
    against real asymmetry).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (3, 3):
        raise TensorMismatchError(f"factor matrix must be 3x3, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("factor matrix must be finite")
    full = core.full()
    for mode in range(1, core.order + 1):
        full = mode_product(full, mode, a)
    return SymmetricTensor.from_full(full)


def tucker_full_batch(core_full, a_stack):
    """Equal-factor Tucker product for a stack of factor matrices.

    ``core_full`` is a dense ``(3,)*order`` array shared across sites and
    ``a_stack`` has shape ``(N, 3, 3)``.  Returns the dense products with
    shape ``(N,) + (3,)*order``.  This is the hot path of likelihood
    evaluation, so it runs as ``order`` batched matrix products instead of
    per-site mode products.
    """
    core_full = np.asarray(core_full, dtype=np.float64)
    a_stack = np.asarray(a_stack, dtype=np.float64)
    order = core_full.ndim
    n = a_stack.shape[0]
    at = np.swapaxes(a_stack, 1, 2)  # out[n, :, j] = sum_i in[n, :, i] a[n, j, i]
    out = np.broadcast_to(core_full, (n,) + core_full.shape)
    for mode in range(order):
        out = np.moveaxis(out, 1 + mode, out.ndim - 1)
        shape = out.shape
        out = np.matmul(out.reshape(n, -1, 3), at).reshape(shape)
        out = np.moveaxis(out, out.ndim - 1, 1 + mode)
    return out


def tucker_flat_batch(core_full, a_stack):
    """Equal-factor Tucker products flattened to ``(N, 3**order)``.

    Same contraction as :func:`tucker_full_batch` but tuned for the
    likelihood inner loop: modes are consumed in pairs through per-site
    Kronecker squares of the factor matrix (one batched matrix product per
    pair), and rank 2 short-circuits to ``A C A^T``.  The output axes come
    back permuted relative to the canonical order, which is harmless because
    the result of an equal-factor product on a symmetric core is symmetric.
    """
    core_full = np.asarray(core_full, dtype=np.float64)
    a = np.asarray(a_stack, dtype=np.float64)
    order = core_full.ndim
    n = a.shape[0]
    if order == 2:
        out = np.matmul(np.matmul(a, core_full), a.transpose(0, 2, 1))
        return out.reshape(n, 9)
    # kron(A, A) per site: kb[n, r1*3+r2, c1*3+c2] = a[n,r1,c1] * a[n,r2,c2]
    kb = (a[:, :, None, :, None] * a[:, None, :, None, :]).reshape(n, 9, 9)
    kbt = kb.transpose(0, 2, 1)
    half = order // 2
    arr = np.matmul(core_full.reshape(9 ** (half - 1), 9), kbt)
    for step in range(1, half):
        # axes: (N, remaining input block, last input pair, output block)
        arr = arr.reshape(n, 9 ** (half - step - 1), 9, 9**step)
        arr = np.swapaxes(arr, 2, 3)
        arr = np.matmul(arr.reshape(n, -1, 9), kbt)
    return arr.reshape(n, 3**order)


def compress_full_batch(full_batch, order):
    """Collapse a stack of dense symmetric arrays to coefficient rows.

    No symmetry check: callers use this only on arrays that are symmetric by
    construction.  Shape ``(N,) + (3,)*order`` to ``(N, N_l)``.
    """
    _, mult, _, gather = _TABLES[order]
    flat = np.asarray(full_batch).reshape(len(full_batch), -1)
    return (flat @ gather) / mult


def expand_rows(coeffs, order):
    """Expand ``(N, N_l)`` coefficient rows to flat ``(N, 3**order)`` arrays."""
    _check_order(order)
    f2u = _TABLES[order][2]
    return np.asarray(coeffs, dtype=np.float64)[:, f2u]


def grid_coords(nx, ny):
    """Raster-ordered node coordinates of the normalized unit grid."""
    if nx < 2 or ny < 2:
        raise ValueError("grid needs at least 2 nodes per axis")
    xs = np.linspace(0.0, 1.0, nx)
    ys = np.linspace(0.0, 1.0, ny)
    return np.stack([np.tile(xs, ny), np.repeat(ys, nx)], axis=1)


class TensorField:
    """A finite set of same-order tensors at distinct planar positions.

    Parameters
    ----------
    order : int
        Common tensor order.
    coords : array_like, shape (N, 2)
        Site positions ``[x, y]`` in normalized units.
    coeffs : array_like, shape (N, N_l)
        Unique coefficients per site, canonical order.
    grid_shape : tuple or None
        ``(nx, ny)`` when the sites form a raster-ordered rectangular grid
        (x varying fastest), else None for an irregular site list.
    """

    __slots__ = ("order", "coords", "coeffs", "grid_shape")

    def __init__(self, order, coords, coeffs, grid_shape=None):
        _check_order(order)
        coords = np.asarray(coords, dtype=np.float64)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise TensorMismatchError(f"coords must be (N, 2), got {coords.shape}")
        n = unique_count(order)
        if coeffs.shape != (coords.shape[0], n):
            raise TensorMismatchError(
                f"coeffs must be ({coords.shape[0]}, {n}), got {coeffs.shape}"
            )
        if not (np.all(np.isfinite(coords)) and np.all(np.isfinite(coeffs))):
            raise ValueError("field coordinates and coefficients must be finite")
        if len(np.unique(coords, axis=0)) != coords.shape[0]:
            raise ValueError("field sites must be pairwise distinct")
        if grid_shape is not None:
            nx, ny = grid_shape
            if nx * ny != coords.shape[0]:
                raise TensorMismatchError(
                    f"grid {nx}x{ny} does not match {coords.shape[0]} sites"
                )
            grid_shape = (int(nx), int(ny))
        self.order = order
        self.coords = coords.copy()
        self.coeffs = coeffs.copy()
        self.grid_shape = grid_shape

    @property
    def n_sites(self):
        return self.coords.shape[0]

    def tensor(self, i):
        """The tensor at site ``i``."""
        return SymmetricTensor(self.order, self.coeffs[i])

    def grid_axes(self):
        """Axis coordinates ``(xs, ys)`` of a raster-ordered rectangular grid.

        Raises :class:`TensorMismatchError` when the field is not such a grid
        (interpolation baselines require one).
        """
        if self.grid_shape is None:
            raise TensorMismatchError("field does not carry a grid shape")
        nx, ny = self.grid_shape
        xs = self.coords[:nx, 0]
        ys = self.coords[::nx, 1]
        expect = np.stack(
            [np.tile(xs, ny), np.repeat(ys, nx)], axis=1
        )
        if not (
            np.all(np.diff(xs) > 0)
            and np.all(np.diff(ys) > 0)
            and np.array_equal(expect, self.coords)
        ):
            raise TensorMismatchError("field sites are not a raster-ordered grid")
        return xs, ys

    @classmethod
    def from_grid(cls, order, nx, ny, coeffs):
        """Build a field on the normalized unit grid ``[0, 1]^2``.

        Node ``(ix, iy)`` sits at ``(ix/(nx-1), iy/(ny-1))``; sites are
        raster ordered with x varying fastest.
        """
        return cls(order, grid_coords(nx, ny), coeffs, grid_shape=(nx, ny))

    def __repr__(self):
        return (
            f"TensorField(order={self.order}, n_sites={self.n_sites}, "
            f"grid_shape={self.grid_shape})"
        )
