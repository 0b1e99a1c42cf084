"""Probabilistic model for tensor fields built on the Tucker product.

A field follows the process when the tensor at site ``z`` is the equal-factor
Tucker product of a shared symmetric core with the site's 3x3 factor matrix
``A(z)``, each of whose nine entries is an independent zero-mean GP over the
plane.  The core's unique coefficients carry an i.i.d. ``N(0, c^2)`` prior,
the GP length-scale a log-normal prior, and observed tensors a Gaussian
likelihood whose quadratic term is the squared Frobenius distance over all
``3**order`` components with a common variance ``sigma2``.

The factor entries are sampled unconstrained: rescaling every ``A(z)`` by
``s`` while dividing the core by ``s**order`` leaves all reconstructed
tensors unchanged, so any normalization of the factors is absorbed by the
core and nothing is lost by dropping a unit-column constraint.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import TensorMismatchError
from .gp import KernelParams, factor_kernel_matrix, gaussian_log_density
from .tensors import (
    SymmetricTensor,
    TensorField,
    compress_full_batch,
    expand_rows,
    tucker_flat_batch,
    tucker_full_batch,
    unique_count,
)

#: likelihood variance of each tensor component (fixed hyperparameter)
DEFAULT_SIGMA2 = 0.01

#: prior variance of the core's unique coefficients
DEFAULT_C2 = 1.0


@dataclass(frozen=True)
class LogNormalPrior:
    """Log-normal density, parameterized by its median and log-space sd."""

    median: float = 0.1
    log_sd: float = 1.0

    def logpdf(self, x):
        if x <= 0 or not math.isfinite(x):
            return -math.inf
        lx = math.log(x)
        mu = math.log(self.median)
        return (
            -lx
            - math.log(self.log_sd)
            - 0.5 * math.log(2.0 * math.pi)
            - 0.5 * ((lx - mu) / self.log_sd) ** 2
        )


DEFAULT_THETA_PRIOR = LogNormalPrior()


@dataclass(frozen=True)
class TDPState:
    """All latent variables of the model at the training sites.

    ``a_values`` holds one 3x3 factor matrix per site, shape ``(N, 3, 3)``;
    ``core`` is the shared symmetric tensor; ``theta`` the GP length-scale.
    ``sigma2`` and ``c2`` are fixed hyperparameters carried along for
    bookkeeping.
    """

    a_values: np.ndarray
    core: SymmetricTensor
    theta: float
    sigma2: float = DEFAULT_SIGMA2
    c2: float = DEFAULT_C2

    def __post_init__(self):
        a = np.asarray(self.a_values, dtype=np.float64)
        if a.ndim != 3 or a.shape[1:] != (3, 3):
            raise TensorMismatchError(f"a_values must be (N, 3, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("factor matrices must be finite")
        if self.sigma2 <= 0 or self.c2 <= 0:
            raise ValueError("sigma2 and c2 must be positive")
        object.__setattr__(self, "a_values", a.copy())

    @property
    def n_sites(self):
        return self.a_values.shape[0]

    @property
    def order(self):
        return self.core.order


def flatten_latents(a_values):
    """Vectorize factor matrices site-major, row-major within each matrix."""
    a = np.asarray(a_values, dtype=np.float64)
    return a.reshape(-1).copy()


def unflatten_latents(u, n_sites):
    """Inverse of :func:`flatten_latents`."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (9 * n_sites,):
        raise TensorMismatchError(f"latent vector should have length {9 * n_sites}")
    return u.reshape(n_sites, 3, 3).copy()


def sample_factor_entries(coords, params, rng):
    """Draw the nine factor-entry GP vectors at ``coords``.

    Entries are drawn in row-major matrix order, each as an independent GP
    prior sample sharing one kernel factorization.  Returns ``(N, 3, 3)``.
    """
    coords = np.asarray(coords, dtype=np.float64)
    chol = factor_kernel_matrix(coords, params)
    n = coords.shape[0]
    a = np.empty((n, 3, 3))
    for r in range(3):
        for c in range(3):
            a[:, r, c] = chol @ rng.standard_normal(n)
    return a


def sample_core(order, c2, rng):
    """Draw a core tensor with i.i.d. ``N(0, c2)`` unique coefficients."""
    return SymmetricTensor(
        order, math.sqrt(c2) * rng.standard_normal(unique_count(order))
    )


def reconstruct_coeffs(core, a_values):
    """Tucker-reconstruct coefficient rows at every site, shape ``(N, N_l)``."""
    full = tucker_full_batch(core.full(), a_values)
    return compress_full_batch(full, core.order)


def reconstruct_at(state, a_at_site):
    """Tensor produced by the state's core and one factor matrix."""
    full = tucker_full_batch(state.core.full(), np.asarray(a_at_site)[None, :, :])
    return SymmetricTensor(state.order, compress_full_batch(full, state.order)[0])


def sample_prior_field(coords, order, params, c2, rng):
    """One draw of the process at ``coords``: a complete tensor field."""
    a = sample_factor_entries(coords, params, rng)
    core = sample_core(order, c2, rng)
    return TensorField(order, coords, reconstruct_coeffs(core, a))


def log_likelihood(data, state):
    """Gaussian log likelihood of an observed field under a state.

    Every component of every ``3**order`` array is an independent Gaussian
    with variance ``sigma2`` around the reconstructed tensor, so the
    quadratic term is the summed squared Frobenius distance and the
    normalizer counts ``N * 3**order`` components.
    """
    if data.order != state.order:
        raise TensorMismatchError(
            f"data order {data.order} != core order {state.order}"
        )
    if data.n_sites != state.n_sites:
        raise TensorMismatchError(
            f"data has {data.n_sites} sites, state has {state.n_sites}"
        )
    x_full = expand_rows(data.coeffs, data.order)
    rss = _residual_sumsq(x_full, state.core.full(), state.a_values)
    return _loglik_from_rss(rss, state.sigma2, data.n_sites, data.order)


def _residual_sumsq(x_full, core_full, a_values):
    t_full = tucker_flat_batch(core_full, a_values)
    d = x_full - t_full
    return float(np.sum(d * d))


def _loglik_from_rss(rss, sigma2, n_sites, order):
    n_comp = n_sites * 3**order
    return -0.5 * rss / sigma2 - 0.5 * n_comp * math.log(2.0 * math.pi * sigma2)


def log_prior(state, coords, theta_prior=DEFAULT_THETA_PRIOR, jitter=1e-8):
    """Joint log prior of a state: GP factor entries, core, and length-scale.

    Returns ``-inf`` outside the support (non-positive length-scale).
    """
    if state.theta <= 0 or not math.isfinite(state.theta):
        return -math.inf
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[0] != state.n_sites:
        raise TensorMismatchError("coords and state sites disagree")
    chol = factor_kernel_matrix(coords, KernelParams(state.theta, 1.0, jitter))
    entries = state.a_values.reshape(state.n_sites, 9)
    gp_term = gaussian_log_density(entries, chol)
    d = state.core.coeffs
    core_term = -0.5 * float(d @ d) / state.c2 - 0.5 * d.size * math.log(
        2.0 * math.pi * state.c2
    )
    return gp_term + core_term + theta_prior.logpdf(state.theta)
