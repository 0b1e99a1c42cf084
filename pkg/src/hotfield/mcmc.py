"""Posterior sampling and prediction for the Tucker-process model.

One chain cycles three move blocks per iteration: an elliptical slice update
for each of the nine factor-entry GP vectors (rejection-free, needs only the
prior Cholesky factor and the likelihood), a log-space Metropolis random walk
on the kernel length-scale (the likelihood does not involve the length-scale,
so its acceptance ratio weighs the GP prior of the factor entries, the
log-normal prior, and the Jacobian of the log transform), and a joint
Gaussian random walk on the core's unique coefficients.

Chains are driven by one seeded generator, so runs are bit-reproducible.
The nine slice updates are applied sequentially -- each changes the
likelihood seen by the next -- and must not be parallelized within a cycle.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import FactorizationError, NumericalError
from .gp import (
    KernelParams,
    conditional_mean_columns,
    cross_covariance,
    factor_from_sqdist,
    factor_kernel_matrix,
    gaussian_log_density,
    pairwise_sqdist,
)
from .model import (
    DEFAULT_C2,
    DEFAULT_SIGMA2,
    DEFAULT_THETA_PRIOR,
    TDPState,
    _loglik_from_rss,
    _residual_sumsq,
    reconstruct_coeffs,
)
from .tensors import (
    SymmetricTensor,
    TensorField,
    expand_rows,
    multiplicities,
)

_ESS_MAX_SHRINK = 1000

#: Metropolis acceptance rate the burn-in step adaptation aims for
TARGET_ACCEPTANCE = 0.3


@dataclass(frozen=True)
class McmcConfig:
    """Chain settings: lengths, proposal scales, and the seed.

    ``mh_step_theta`` is the sd of the log-space length-scale random walk;
    ``mh_step_core`` scales the core proposal sd as a multiple of the core
    prior sd ``sqrt(c2)``.  Both are starting values: during burn-in the
    steps adapt toward :data:`TARGET_ACCEPTANCE` in windows of
    ``adapt_window`` iterations and freeze once burn-in ends, which keeps
    the post-burn-in chain a valid fixed-kernel Metropolis sampler.
    """

    n_iters: int = 5000
    burn_in: int = 1000
    thin: int = 10
    mh_step_theta: float = 0.1
    mh_step_core: float = 0.05
    seed: int = 0
    adapt_window: int = 50

    def __post_init__(self):
        if self.n_iters <= 0 or self.burn_in < 0 or self.burn_in >= self.n_iters:
            raise ValueError("need 0 <= burn_in < n_iters")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.mh_step_theta <= 0 or self.mh_step_core <= 0:
            raise ValueError("proposal scales must be positive")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be >= 1")


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws plus chain diagnostics.

    Acceptance rates count post-burn-in iterations only, where the proposal
    kernel is frozen; ``log_posterior`` traces every iteration.
    """

    states: list
    accept_theta: float
    accept_core: float
    log_posterior: np.ndarray

    def __post_init__(self):
        if not self.states:
            raise ValueError("a completed run must store at least one sample")
        if not (0.0 <= self.accept_theta <= 1.0 and 0.0 <= self.accept_core <= 1.0):
            raise ValueError("acceptance rates must lie in [0, 1]")

    def thetas(self):
        return np.array([s.theta for s in self.states])


def elliptical_slice_update(latent, prior_chol, loglik, rng, cur_loglik=None):
    """One elliptical slice transition for a zero-mean Gaussian latent.

    Proposes along the ellipse through the current point and a fresh prior
    draw ``prior_chol @ eps``, shrinking the angle bracket toward the current
    point until the likelihood clears a uniformly slice-sampled threshold.
    Never evaluates the prior density; returns ``(new_latent, new_loglik)``.
    """
    latent = np.asarray(latent, dtype=np.float64)
    if cur_loglik is None:
        cur_loglik = loglik(latent)
    if not math.isfinite(cur_loglik):
        raise ValueError("elliptical slice sampling needs a finite starting log-likelihood")
    nu = prior_chol @ rng.standard_normal(latent.shape[0])
    log_y = cur_loglik + math.log(1.0 - rng.random())
    phi = rng.uniform(0.0, 2.0 * math.pi)
    phi_min, phi_max = phi - 2.0 * math.pi, phi
    for _ in range(_ESS_MAX_SHRINK):
        prop = latent * math.cos(phi) + nu * math.sin(phi)
        ll = loglik(prop)
        if ll > log_y:
            return prop, ll
        if phi < 0.0:
            phi_min = phi
        else:
            phi_max = phi
        phi = rng.uniform(phi_min, phi_max)
    raise NumericalError(
        f"slice bracket failed to shrink onto the slice after {_ESS_MAX_SHRINK} steps"
    )


def _theta_potential(theta, entries, sqdist, theta_prior, jitter):
    """GP factor-entry density plus length-scale prior plus log Jacobian."""
    chol = factor_from_sqdist(sqdist, KernelParams(theta, 1.0, jitter))
    return (
        gaussian_log_density(entries, chol)
        + theta_prior.logpdf(theta)
        + math.log(theta)
    )


def mh_update_theta(
    state, coords, cfg, rng, theta_prior=DEFAULT_THETA_PRIOR, jitter=1e-8, sqdist=None
):
    """Metropolis step on the length-scale via a log-space random walk.

    Returns ``(state, accepted)``.  Proposals whose kernel matrix cannot be
    factorized even after jitter escalation are rejected.  ``sqdist`` may
    carry the precomputed squared-distance matrix of ``coords``.
    """
    if sqdist is None:
        sqdist = pairwise_sqdist(coords)
    entries = state.a_values.reshape(state.n_sites, 9)
    cur = _theta_potential(state.theta, entries, sqdist, theta_prior, jitter)
    prop_theta = state.theta * math.exp(cfg.mh_step_theta * rng.standard_normal())
    try:
        prop = _theta_potential(prop_theta, entries, sqdist, theta_prior, jitter)
    except FactorizationError:
        return state, False
    if math.log(1.0 - rng.random()) < prop - cur:
        return replace(state, theta=prop_theta), True
    return state, False


def mh_update_core(state, data, cfg, rng, cur_loglik=None):
    """Metropolis step on the core's unique coefficients, jointly.

    Gaussian random walk with sd ``cfg.mh_step_core * sqrt(c2)``, accepted
    against likelihood times the ``N(0, c2 I)`` core prior.  Returns
    ``(state, accepted)``.
    """
    x_full = expand_rows(data.coeffs, data.order)
    if cur_loglik is None:
        cur_loglik = _loglik_from_rss(
            _residual_sumsq(x_full, state.core.full(), state.a_values),
            state.sigma2, data.n_sites, data.order,
        )
    d = state.core.coeffs
    step = cfg.mh_step_core * math.sqrt(state.c2)
    d_prop = d + step * rng.standard_normal(d.size)
    core_prop = SymmetricTensor(state.order, d_prop)
    ll_prop = _loglik_from_rss(
        _residual_sumsq(x_full, core_prop.full(), state.a_values),
        state.sigma2, data.n_sites, data.order,
    )
    log_ratio = (
        ll_prop - cur_loglik - 0.5 * (d_prop @ d_prop - d @ d) / state.c2
    )
    if math.log(1.0 - rng.random()) < log_ratio:
        return replace(state, core=core_prop), True
    return state, False


def run_mcmc(
    data,
    cfg,
    sigma2=DEFAULT_SIGMA2,
    c2=DEFAULT_C2,
    theta_prior=DEFAULT_THETA_PRIOR,
    jitter=1e-8,
):
    """Sample the posterior over factor entries, core, and length-scale.

    Initialization sets every factor matrix to the identity and the core to
    the mean coefficient vector of the training field, which reproduces the
    mean field exactly.  Starting all sites at the same factor matrix keeps
    the per-site gauge freedom of the Tucker product aligned across sites;
    chains started from independent prior draws settle into incoherent
    per-site gauges that fit the data but ruin both length-scale learning
    and interpolation.  Returns :class:`PosteriorSamples` with the thinned
    states, Metropolis acceptance rates, and the per-iteration log-posterior
    trace.
    """
    if data.n_sites == 0:
        raise ValueError("training field is empty")
    rng = np.random.default_rng(cfg.seed)
    coords = data.coords
    order = data.order
    n = data.n_sites
    x_full = expand_rows(data.coeffs, order)
    sqdist = pairwise_sqdist(coords)

    theta = theta_prior.median
    try:
        chol = factor_from_sqdist(sqdist, KernelParams(theta, 1.0, jitter))
    except FactorizationError as exc:
        raise FactorizationError(
            f"cannot factor the kernel at the initial length-scale {theta:g}: {exc}"
        ) from exc
    a = np.tile(np.eye(3), (n, 1, 1))
    core = SymmetricTensor(order, data.coeffs.mean(axis=0))

    def loglik(a_values, core_full):
        return _loglik_from_rss(
            _residual_sumsq(x_full, core_full, a_values), sigma2, n, order
        )

    cur_ll = loglik(a, core.full())
    n_l = core.coeffs.size
    states = []
    log_post = np.empty(cfg.n_iters)
    acc_theta = acc_core = 0          # post burn-in, frozen kernel
    win_theta = win_core = 0          # current adaptation window
    working = cfg

    for it in range(cfg.n_iters):
        # (1) elliptical slice updates, one factor entry at a time
        for r in range(3):
            for c in range(3):
                work = a.copy()

                def entry_loglik(vec):
                    work[:, r, c] = vec
                    return loglik(work, core.full())

                new_vec, cur_ll = elliptical_slice_update(
                    a[:, r, c].copy(), chol, entry_loglik, rng, cur_loglik=cur_ll
                )
                a[:, r, c] = new_vec

        state = TDPState(a_values=a, core=core, theta=theta, sigma2=sigma2, c2=c2)

        # (2) length-scale move (likelihood unaffected)
        state, accepted = mh_update_theta(
            state, coords, working, rng,
            theta_prior=theta_prior, jitter=jitter, sqdist=sqdist,
        )
        if accepted:
            win_theta += 1
            theta = state.theta
            chol = factor_from_sqdist(sqdist, KernelParams(theta, 1.0, jitter))
        if it >= cfg.burn_in:
            acc_theta += accepted

        # (3) core move
        state, accepted = mh_update_core(state, data, working, rng, cur_loglik=cur_ll)
        if accepted:
            win_core += 1
            core = state.core
            cur_ll = loglik(a, core.full())
        if it >= cfg.burn_in:
            acc_core += accepted

        d = core.coeffs
        log_post[it] = (
            cur_ll
            + gaussian_log_density(a.reshape(n, 9), chol)
            - 0.5 * float(d @ d) / c2
            - 0.5 * n_l * math.log(2.0 * math.pi * c2)
            + theta_prior.logpdf(theta)
        )

        if it < cfg.burn_in and (it + 1) % cfg.adapt_window == 0:
            working = replace(
                working,
                mh_step_theta=_adapted_step(
                    working.mh_step_theta, win_theta / cfg.adapt_window
                ),
                mh_step_core=_adapted_step(
                    working.mh_step_core, win_core / cfg.adapt_window
                ),
            )
            win_theta = win_core = 0

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            states.append(
                TDPState(a_values=a.copy(), core=core, theta=theta, sigma2=sigma2, c2=c2)
            )

    n_kept = cfg.n_iters - cfg.burn_in
    return PosteriorSamples(
        states=states,
        accept_theta=acc_theta / n_kept,
        accept_core=acc_core / n_kept,
        log_posterior=log_post,
    )


def _adapted_step(step, rate):
    """Nudge a random-walk step toward the target acceptance rate."""
    return float(np.clip(step * math.exp(rate - TARGET_ACCEPTANCE), 1e-4, 10.0))


def predict(samples, train_coords, query_coords, jitter=1e-8, aggregate="tensor_mean"):
    """Posterior-predictive tensors at new sites.

    For each stored state the nine factor-entry vectors are conditioned on
    their training values under that state's length-scale, the predictive
    means are assembled into factor matrices at the query sites, and tensors
    are reconstructed with that state's core.  With ``aggregate="tensor_mean"``
    (default) reconstructed tensors are averaged across states, which
    propagates core and length-scale uncertainty; ``"latent_mean"`` averages
    the predicted factor entries and the core first and reconstructs once.

    Returns ``(field, spread)`` where ``spread[i]`` is the across-sample
    standard deviation of the Frobenius norm at query site ``i``.
    """
    if not samples.states:
        raise ValueError("no posterior samples to predict from")
    query_coords = np.atleast_2d(np.asarray(query_coords, dtype=np.float64))
    if query_coords.shape[0] == 0:
        raise ValueError("no query sites")
    if aggregate not in ("tensor_mean", "latent_mean"):
        raise ValueError(f"unknown aggregate mode {aggregate!r}")
    order = samples.states[0].order
    mult = multiplicities(order)
    m = query_coords.shape[0]

    coeff_sum = np.zeros((m, mult.size))
    norm_sum = np.zeros(m)
    norm_sq_sum = np.zeros(m)
    a_star_sum = np.zeros((m, 3, 3))
    core_sum = np.zeros(mult.size)

    for state in samples.states:
        params = KernelParams(state.theta, 1.0, jitter)
        chol = factor_kernel_matrix(train_coords, params)
        ks = cross_covariance(train_coords, query_coords, params)
        entries = state.a_values.reshape(state.n_sites, 9)
        a_star = conditional_mean_columns(chol, entries, ks).reshape(m, 3, 3)
        coeffs = reconstruct_coeffs(state.core, a_star)
        coeff_sum += coeffs
        norms = np.sqrt((mult * coeffs * coeffs).sum(axis=1))
        norm_sum += norms
        norm_sq_sum += norms * norms
        a_star_sum += a_star
        core_sum += state.core.coeffs

    k = len(samples.states)
    if aggregate == "tensor_mean":
        mean_coeffs = coeff_sum / k
    else:
        mean_core = SymmetricTensor(order, core_sum / k)
        mean_coeffs = reconstruct_coeffs(mean_core, a_star_sum / k)
    var = np.maximum(norm_sq_sum / k - (norm_sum / k) ** 2, 0.0)
    spread = np.sqrt(var)
    return TensorField(order, query_coords, mean_coeffs), spread
