"""Mixture-of-Gaussians posterior predictive over hyperparameter draws,
and the evaluation metrics (RMSE, NLPD) in original data units.

Each hyperparameter sample theta_j contributes one Gaussian predictive
component with weight 1/J; metrics are pointwise, so only diagonal
predictive variances are kept per component.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .data import Dataset
from .hmc import Trace
from .linalg import LOG_2PI, NumericalError
from .sgpr import predict_fixed

__all__ = [
    "MixturePredictive",
    "mixture_predict",
    "mixture_from_components",
    "rmse",
    "nlpd",
    "destandardize",
]


@dataclass
class MixturePredictive:
    """Per-sample Gaussian components (standardized units) with uniform
    weights, plus the statistics needed to restore original units."""

    means: np.ndarray       # J x P
    var_diags: np.ndarray   # J x P
    weights: np.ndarray     # (J,), sums to 1
    y_mean: float
    y_std: float
    includes_noise: bool

    def __post_init__(self):
        if self.means.shape != self.var_diags.shape:
            raise ValueError("means and var_diags must have matching shapes")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def mixture_mean(self) -> np.ndarray:
        """Pointwise mixture mean, standardized units."""
        return self.weights @ self.means

    def mixture_var(self) -> np.ndarray:
        """Pointwise mixture variance (law of total variance)."""
        mu = self.mixture_mean()
        return self.weights @ (self.var_diags + self.means**2) - mu**2

    def point_prediction(self) -> np.ndarray:
        """Mixture mean in original units (the RMSE point prediction)."""
        return self.mixture_mean() * self.y_std + self.y_mean


def mixture_from_components(
    means, var_diags, data: Dataset, include_noise: bool
) -> MixturePredictive:
    means = np.atleast_2d(np.asarray(means, dtype=float))
    var_diags = np.atleast_2d(np.asarray(var_diags, dtype=float))
    j = means.shape[0]
    return MixturePredictive(
        means=means,
        var_diags=var_diags,
        weights=np.full(j, 1.0 / j),
        y_mean=data.y_mean,
        y_std=data.y_std,
        includes_noise=include_noise,
    )


def mixture_predict(
    data: Dataset,
    z: np.ndarray,
    trace: Trace,
    X_star: np.ndarray,
    include_noise: bool = True,
) -> MixturePredictive:
    """Posterior predictive mixture: one sparse-GP component per trace
    draw.  Components whose factorization fails are dropped with a warning
    and the weights renormalized."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    means, var_diags, dropped = [], [], 0
    for j in range(len(trace)):
        h = trace.hypers(j)
        try:
            mu, var = predict_fixed(
                data, h, z, X_star, include_noise=include_noise, full_cov=False
            )
        except NumericalError:
            dropped += 1
            continue
        means.append(mu)
        var_diags.append(var)
    if not means:
        raise NumericalError("every mixture component failed to factorize")
    if dropped:
        warnings.warn(f"dropped {dropped} mixture component(s); weights renormalized")
    return mixture_from_components(
        np.asarray(means), np.asarray(var_diags), data, include_noise
    )


def rmse(y_true: np.ndarray, point_pred: np.ndarray) -> float:
    """Root mean squared error; both arguments in original output units."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    point_pred = np.asarray(point_pred, dtype=float).ravel()
    if y_true.shape != point_pred.shape:
        raise ValueError("length mismatch between targets and predictions")
    return float(np.sqrt(np.mean((y_true - point_pred) ** 2)))


def nlpd(y_true: np.ndarray, pred: MixturePredictive) -> float:
    """Average negative log predictive density of held-out targets
    (original units) under the mixture.

    The mixture is evaluated on the standardized scale via log-sum-exp;
    the change of variables adds log(y_std) per point.
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    if np.any(pred.var_diags <= 0):
        raise ValueError("predictive variances must be positive for NLPD")
    y_std = (y_true - pred.y_mean) / pred.y_std        # back to model scale
    # (J, P) component log densities
    log_comp = -0.5 * (
        LOG_2PI + np.log(pred.var_diags)
        + (y_std[None, :] - pred.means) ** 2 / pred.var_diags
    )
    log_mix = logsumexp(log_comp, b=pred.weights[:, None], axis=0)
    return float(-np.mean(log_mix) + np.log(pred.y_std))


def destandardize(values, stats, kind: str):
    """Restore standardized values to original units.

    ``stats`` is anything with ``y_mean``/``y_std`` attributes (Dataset or
    MixturePredictive); ``kind`` is one of mean/std/variance.
    """
    values = np.asarray(values, dtype=float)
    if kind == "mean":
        return values * stats.y_std + stats.y_mean
    if kind == "std":
        return values * stats.y_std
    if kind == "variance":
        return values * stats.y_std**2
    raise ValueError(f"unknown kind {kind!r}; use mean, std or variance")
