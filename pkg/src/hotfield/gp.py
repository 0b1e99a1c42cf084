"""Gaussian process machinery on planar sites.

Exponentiated quadratic kernel, Gram matrix assembly, Cholesky factorization
with jitter escalation, prior sampling, zero-mean log densities, and exact
Gaussian conditioning.  Sites live in normalized ``[0, 1]^2`` coordinates, so
a length-scale of 0.1 means the same thing on every grid size.

The kernel amplitude is fixed at 1 by default: a free amplitude would be
unidentifiable against the scale of the core tensor it ends up multiplying.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import FactorizationError

#: jitter escalates by x10 from its starting value up to this ceiling
MAX_JITTER = 1e-4


@dataclass(frozen=True)
class KernelParams:
    """Exponentiated quadratic kernel parameters.

    ``length_scale`` is in normalized coordinate units; ``signal_variance``
    is the kernel value at zero distance; ``jitter`` is added to Gram matrix
    diagonals before factorization.
    """

    length_scale: float
    signal_variance: float = 1.0
    jitter: float = 1e-8

    def __post_init__(self):
        if self.length_scale <= 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if self.signal_variance <= 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if self.jitter <= 0:
            raise ValueError(f"jitter must be positive, got {self.jitter}")


@dataclass(frozen=True)
class GPConditional:
    """Predictive Gaussian at query sites: mean vector and covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def variance(self):
        return np.diag(self.cov)


def kernel_eval(z1, z2, params):
    """Kernel value ``sv * exp(-|z1 - z2|^2 / (2 theta^2))`` for two sites."""
    d = np.asarray(z1, dtype=np.float64) - np.asarray(z2, dtype=np.float64)
    r2 = float(d @ d)
    return params.signal_variance * math.exp(-0.5 * r2 / params.length_scale**2)


def pairwise_sqdist(za, zb=None):
    """Squared Euclidean distances between site sets, shape ``(len(za), len(zb))``."""
    za = np.atleast_2d(np.asarray(za, dtype=np.float64))
    zb = za if zb is None else np.atleast_2d(np.asarray(zb, dtype=np.float64))
    return ((za[:, None, :] - zb[None, :, :]) ** 2).sum(axis=2)


def cross_covariance(za, zb, params):
    """Kernel matrix between two site sets, shape ``(len(za), len(zb))``."""
    d2 = pairwise_sqdist(za, zb)
    return params.signal_variance * np.exp(-0.5 * d2 / params.length_scale**2)


def covariance_matrix(sites, params, jitter=None):
    """Gram matrix of the kernel over ``sites`` with jitter on the diagonal."""
    return kernel_from_sqdist(pairwise_sqdist(sites), params, jitter=jitter)


def kernel_from_sqdist(d2, params, jitter=None):
    """Gram matrix from a precomputed squared-distance matrix."""
    k = params.signal_variance * np.exp(-0.5 * d2 / params.length_scale**2)
    jit = params.jitter if jitter is None else jitter
    k[np.diag_indices_from(k)] += jit
    return k


def factor_psd(k):
    """Lower-triangular Cholesky factor of a symmetric PSD matrix.

    Raises :class:`FactorizationError` naming the failing pivot when the
    matrix is not positive definite.
    """
    k = np.asarray(k, dtype=np.float64)
    c, info = lapack.dpotrf(k, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite: factorization failed at pivot {info - 1}"
        )
    if info < 0:
        raise FactorizationError(f"illegal factorization input (argument {-info})")
    return c


def factor_kernel_matrix(sites, params):
    """Cholesky factor of the kernel Gram matrix, escalating jitter on failure.

    Jitter starts at ``params.jitter`` and is multiplied by 10 until
    factorization succeeds or the ceiling ``MAX_JITTER`` is passed; the last
    failure is re-raised with the attempted range in the message.
    """
    return factor_from_sqdist(pairwise_sqdist(sites), params)


def factor_from_sqdist(d2, params):
    """Same as :func:`factor_kernel_matrix` from a precomputed distance matrix."""
    jit = params.jitter
    while True:
        try:
            return factor_psd(kernel_from_sqdist(d2, params, jitter=jit))
        except FactorizationError as exc:
            last = exc
            jit *= 10.0
            if jit > MAX_JITTER:
                break
    raise FactorizationError(
        f"kernel matrix not factorizable for jitter in [{params.jitter:g}, {MAX_JITTER:g}]: {last}"
    )


def sample_gp_prior(sites, params, rng, n_draws=None):
    """Draw from the zero-mean GP prior at ``sites``.

    Returns a length-``N`` vector (or an ``(N, n_draws)`` matrix when
    ``n_draws`` is given).  Deterministic for a given generator state.
    """
    chol = factor_kernel_matrix(sites, params)
    shape = (chol.shape[0],) if n_draws is None else (chol.shape[0], n_draws)
    return chol @ rng.standard_normal(shape)


def gaussian_log_density(values, chol):
    """Zero-mean multivariate normal log density from a Cholesky factor.

    ``values`` may be a vector or an ``(N, m)`` matrix of columns; columns are
    treated as independent draws and their densities summed.
    """
    v = np.asarray(values, dtype=np.float64)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[:, None]
    alpha = solve_triangular(chol, v, lower=True, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    n = v.shape[0]
    quad = (alpha * alpha).sum(axis=0)
    dens = -0.5 * quad - 0.5 * logdet - 0.5 * n * math.log(2.0 * math.pi)
    return float(dens[0]) if squeeze else float(dens.sum())


def gp_conditional(train_sites, train_values, query_sites, params):
    """Exact Gaussian conditioning of the GP prior on training values.

    Mean ``Ks^T K^-1 f`` and covariance ``Kss - Ks^T K^-1 Ks`` with ``K``
    jittered per ``params``.  Factorization failures escalate jitter first
    and then propagate.
    """
    train_values = np.asarray(train_values, dtype=np.float64)
    if train_values.shape[0] != np.atleast_2d(train_sites).shape[0]:
        raise ValueError("training values and sites disagree in length")
    chol = factor_kernel_matrix(train_sites, params)
    ks = cross_covariance(train_sites, query_sites, params)
    kss = cross_covariance(query_sites, query_sites, params)
    alpha = solve_triangular(chol, train_values, lower=True)
    beta = solve_triangular(chol, ks, lower=True)
    mean = beta.T @ alpha
    cov = kss - beta.T @ beta
    cov = 0.5 * (cov + cov.T)
    return GPConditional(mean=mean, cov=cov)


def conditional_mean_columns(chol, train_values, ks):
    """Predictive means for several latent columns sharing one factorization.

    ``train_values`` is ``(N, m)``, ``ks`` the train-to-query kernel block
    ``(N, M)``; returns ``(M, m)``.  Used by posterior prediction, where nine
    latent functions share each sample's kernel matrix.
    """
    alpha = solve_triangular(
        chol, np.asarray(train_values, dtype=np.float64), lower=True, check_finite=False
    )
    beta = solve_triangular(chol, ks, lower=True, check_finite=False)
    return beta.T @ alpha
