"""Comparison methods: ML-II point estimation, exact-GP hyperparameter
sampling, joint sampling of whitened inducing values and hyperparameters,
and the fixed-inducing-set ablation.

The joint sampler follows the MCMC-for-sparse-GP construction of Hensman
et al. (2015): the inducing values are whitened as u = Lmm v with
v ~ N(0, I), and the target is

    log N(v; 0, I) + log p(theta) + Jacobian
      + sum_n [ log N(y_n; (U^T v)_n, sig^2) - (k_nn - q_nn) / (2 sig^2) ]

with U = Lmm^{-1} Kmn and q_nn = sum_m U[m,n]^2.  For a Gaussian
likelihood the expectation term is closed form, so no quadrature is
needed.  Integrating v out of this density analytically recovers the
collapsed bound; the test suite checks that identity by numerical
quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .hmc import (
    HyperPrior,
    SamplerConfig,
    TargetDensity,
    Trace,
    default_prior,
    gamma_all_prior,
    hmc_sample,
    hyper_param_names,
    make_exact_target,
    _guarded,
)
from .kernels import (
    Hypers,
    from_unconstrained,
    jitter_value,
    kernel_matrix,
    log_jacobian,
    to_unconstrained,
)
from .linalg import LOG_2PI, cholesky, solve_lower, solve_upper
from .predict import MixturePredictive, mixture_from_components
from .trainer import TrainConfig, TrainedModel, optimize_inducing, train, warm_start

__all__ = [
    "ml2_train",
    "exact_hmc_train",
    "joint_hmc_target",
    "joint_hmc_train",
    "joint_mixture_predict",
    "fixed_z_train",
]


def ml2_train(
    data: Dataset, h0: Hypers, z0: np.ndarray, steps: int, lr: float = 0.01
) -> tuple[Hypers, np.ndarray]:
    """Approximate type-II maximum likelihood: joint Adam ascent of the
    collapsed bound in (log-hypers, Z).  This is the warm-start procedure
    run to completion."""
    return warm_start(data, h0, z0, steps, lr)


def exact_hmc_train(
    data: Dataset,
    h0: Hypers,
    config: SamplerConfig,
    prior: HyperPrior | None = None,
) -> Trace:
    """Sample hyperparameters against the exact log marginal likelihood
    (O(N^3) per gradient evaluation)."""
    target = make_exact_target(data, prior)
    return hmc_sample(
        target, config, to_unconstrained(h0),
        param_names=hyper_param_names(data.input_dim),
    )


# ---------------------------------------------------------------------------
# joint (whitened) sampling of inducing values and hyperparameters
# ---------------------------------------------------------------------------

def _phi_lower_half_diag(a: np.ndarray) -> np.ndarray:
    """tril(A) with the diagonal halved: the mask in the Cholesky
    differential dL = L Phi(L^{-1} dK L^{-T})."""
    out = np.tril(a)
    idx = np.diag_indices_from(out)
    out[idx] *= 0.5
    return out


def joint_hmc_target(
    data: Dataset, z: np.ndarray, prior: HyperPrior | None = None
) -> TargetDensity:
    """Log density (and analytic gradient) over the (M + D + 2)-vector
    (v, log-hypers) for the whitened joint sampler."""
    if prior is None:
        prior = gamma_all_prior()
    z = np.atleast_2d(np.asarray(z, dtype=float))
    m = z.shape[0]
    n, d = data.n, data.input_dim
    dim = m + d + 2
    X, y = data.X, data.y

    def split(x):
        return x[:m], x[m:]

    def value(x):
        v, u = split(x)
        h = from_unconstrained(u)
        Kmm = kernel_matrix(z, z, h) + jitter_value(h) * np.eye(m)
        Lm = cholesky(Kmm, name="Kmm")
        U = solve_lower(Lm, kernel_matrix(z, X, h))
        s2 = h.noise_std**2
        r = y - U.T @ v
        trace_pen = (n * h.signal_std**2 - np.sum(U * U)) / (2.0 * s2)
        lik = -0.5 * n * (LOG_2PI + np.log(s2)) - (r @ r) / (2.0 * s2)
        whitened_prior = -0.5 * (v @ v) - 0.5 * m * LOG_2PI
        return float(
            whitened_prior + lik - trace_pen
            + prior.log_density(h) + log_jacobian(u)
        )

    def grad(x):
        v, u = split(x)
        h = from_unconstrained(u)
        Kmm = kernel_matrix(z, z, h) + jitter_value(h) * np.eye(m)
        Kmn = kernel_matrix(z, X, h)
        Lm = cholesky(Kmm, name="Kmm")
        U = solve_lower(Lm, Kmn)
        s2 = h.noise_std**2
        r = y - U.T @ v

        g_v = -v + (U @ r) / s2

        # adjoints of the likelihood part w.r.t. U, then back through the
        # triangular solve and the Cholesky factorization
        G_U = (np.outer(v, r) + U) / s2
        C_mn = solve_upper(Lm, G_U)
        Lm_inv = solve_lower(Lm, np.eye(m))
        C_mm = -(Lm_inv.T @ _phi_lower_half_diag(G_U @ U.T) @ Lm_inv)
        W_mn = C_mn * Kmn
        W_mm = C_mm * Kmm

        g_u = np.empty(d + 2)
        t1 = W_mn.sum(axis=1) @ (z**2)
        t2 = np.sum(z * (W_mn @ X), axis=0)
        t3 = W_mn.sum(axis=0) @ (X**2)
        s1 = W_mm.sum(axis=1) @ (z**2)
        s2m = np.sum(z * (W_mm @ z), axis=0)
        s3 = W_mm.sum(axis=0) @ (z**2)
        g_u[:d] = (t1 - 2.0 * t2 + t3 + s1 - 2.0 * s2m + s3) / h.lengthscales**2
        g_u[d] = (
            2.0 * np.sum(W_mn) + 2.0 * np.sum(W_mm)
            - n * h.signal_std**2 / s2
        )
        dF_ds2 = (
            -0.5 * n / s2
            + (r @ r) / (2.0 * s2 * s2)
            + (n * h.signal_std**2 - np.sum(U * U)) / (2.0 * s2 * s2)
        )
        g_u[d + 1] = 2.0 * s2 * dF_ds2
        g_u += prior.grad_unconstrained(h) + 1.0
        return np.concatenate([g_v, g_u])

    log_density, grad_fn = _guarded(value, grad, dim)
    return TargetDensity(log_density, grad_fn, dim)


def joint_hmc_train(
    data: Dataset,
    h0: Hypers,
    z0: np.ndarray,
    config: SamplerConfig,
    warm_steps: int = 100,
    lr: float = 0.01,
    prior: HyperPrior | None = None,
) -> tuple[np.ndarray, Trace]:
    """Short inducing-location warm start, then one HMC run over the
    whitened joint state.  Z stays fixed while the sampler moves."""
    z, _ = optimize_inducing(data, [h0], z0, warm_steps, lr)
    target = joint_hmc_target(data, z, prior)
    m, d = z.shape[0], data.input_dim
    init = np.concatenate([np.zeros(m), to_unconstrained(h0)])
    names = [f"v[{i}]" for i in range(m)] + hyper_param_names(d)
    mask = np.concatenate([np.zeros(m, dtype=bool), np.ones(d + 2, dtype=bool)])
    trace = hmc_sample(target, config, init, param_names=names, exp_mask=mask)
    return z, trace


def joint_mixture_predict(
    data: Dataset,
    z: np.ndarray,
    trace: Trace,
    X_star: np.ndarray,
    include_noise: bool = True,
) -> MixturePredictive:
    """Mixture predictive for the joint sampler: each draw contributes a
    Gaussian with mean K*m Kmm^{-1} u and variance k** - q** (+ sig^2),
    where u = Lmm v is pinned by the sampled whitened values."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    m = z.shape[0]
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    means, var_diags = [], []
    for j in range(len(trace)):
        x = trace.samples[j]
        v, u = x[:m], x[m:]
        h = from_unconstrained(u)
        Kmm = kernel_matrix(z, z, h) + jitter_value(h) * np.eye(m)
        Lm = cholesky(Kmm, name="Kmm")
        Us = solve_lower(Lm, kernel_matrix(z, X_star, h))
        mean = Us.T @ v
        var = np.maximum(h.signal_std**2 - np.sum(Us * Us, axis=0), 0.0)
        if include_noise:
            var = var + h.noise_std**2
        means.append(mean)
        var_diags.append(var)
    return mixture_from_components(
        np.asarray(means), np.asarray(var_diags), data, include_noise
    )


def fixed_z_train(
    data: Dataset,
    h0: Hypers,
    z0: np.ndarray,
    config: TrainConfig,
    prior: HyperPrior | None = None,
) -> TrainedModel:
    """Ablation: no warm start and no Z optimization, just a single
    sampling window at the initial (random-subset) inducing locations."""
    degenerate = replace(config, warm_start_steps=0, total_steps=0)
    model = train(data, h0, z0, degenerate, prior)
    assert np.array_equal(model.z_opt, np.atleast_2d(np.asarray(z0, dtype=float)))
    return model
