"""Exact GP regression: log marginal likelihood, its gradient, the
predictive distribution, and negative-LML surface gridding.

The log marginal likelihood of targets y under a zero-mean GP with kernel
matrix K and noise variance sig_n^2 is

    lml = -1/2 y^T (K + sig_n^2 I)^{-1} y          (data fit)
          -1/2 log|K + sig_n^2 I|                   (complexity penalty)
          -N/2 log(2 pi)

computed through a single lower Cholesky factor.  These routines are the
reference the sparse bound is tested against, and the target density for
the exact-GP sampling baseline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .kernels import Hypers, jitter_value, kernel_matrix
from .linalg import LOG_2PI, NumericalError, cholesky, solve_lower, solve_upper

__all__ = [
    "exact_lml",
    "exact_lml_grad",
    "exact_predict",
    "GridSpec",
    "SurfaceResult",
    "lml_surface",
    "write_surface",
]


def _noisy_kernel_chol(data: Dataset, h: Hypers):
    """K(X,X) and the lower factor of K + sig_n^2 I (jitter retry on failure)."""
    K = kernel_matrix(data.X, data.X, h)
    Ky = K + (h.noise_std**2) * np.eye(data.n)
    try:
        L = cholesky(Ky, name="K + sig_n^2 I")
    except NumericalError:
        L = cholesky(Ky + jitter_value(h) * np.eye(data.n),
                     name="K + sig_n^2 I (jittered)")
    return K, L


def exact_lml(data: Dataset, h: Hypers) -> float:
    """Exact log marginal likelihood log p(y | theta)."""
    _, L = _noisy_kernel_chol(data, h)
    a = solve_lower(L, data.y)
    return float(
        -0.5 * a @ a - np.sum(np.log(np.diag(L))) - 0.5 * data.n * LOG_2PI
    )


def exact_lml_grad(data: Dataset, h: Hypers) -> np.ndarray:
    """Gradient of exact_lml w.r.t. unconstrained hypers (log scale).

    Uses d lml = 1/2 tr((alpha alpha^T - Ky^{-1}) dKy) with alpha = Ky^{-1} y,
    then the chain rule through the RBF-ARD kernel and the exp transform.
    """
    K, L = _noisy_kernel_chol(data, h)
    n = data.n
    alpha = solve_upper(L, solve_lower(L, data.y))
    Linv = solve_lower(L, np.eye(n))
    Ky_inv = Linv.T @ Linv
    S = np.outer(alpha, alpha) - Ky_inv

    W = S * K
    X = data.X
    d = h.input_dim
    grad = np.empty(d + 2)
    # sum_ij W_ij (x_id - x_jd)^2 expanded as sum W_ij (x_i^2 - 2 x_i x_j + x_j^2)
    # to avoid an N x N x D tensor
    t1 = W.sum(axis=1) @ (X**2)
    t2 = np.sum(X * (W @ X), axis=0)
    t3 = W.sum(axis=0) @ (X**2)
    grad[:d] = 0.5 * (t1 - 2.0 * t2 + t3) / h.lengthscales**2
    grad[d] = float(np.sum(S * K))            # d/dlog sig_f: dKy = 2K
    grad[d + 1] = float(np.trace(S)) * h.noise_std**2  # dKy = 2 sig_n^2 I
    return grad


def exact_predict(
    data: Dataset, h: Hypers, X_star: np.ndarray, include_noise: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance of the latent function at X_star.

    ``include_noise`` adds sig_n^2 to the diagonal (predicting observations
    rather than function values).
    """
    _, L = _noisy_kernel_chol(data, h)
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    Ks = kernel_matrix(data.X, X_star, h)         # N x P
    Kss = kernel_matrix(X_star, X_star, h)
    a = solve_upper(L, solve_lower(L, data.y))
    mean = Ks.T @ a
    V = solve_lower(L, Ks)
    cov = Kss - V.T @ V
    cov = 0.5 * (cov + cov.T)
    np.fill_diagonal(cov, np.maximum(np.diag(cov), 0.0))
    if include_noise:
        cov = cov + h.noise_std**2 * np.eye(X_star.shape[0])
    return mean, cov


# ---------------------------------------------------------------------------
# negative-LML surface gridding
# ---------------------------------------------------------------------------

_AXIS_KINDS = ("sig_f2", "sig_n2", "ls")


@dataclass
class GridSpec:
    """Two gridded axes over a negative-LML surface.

    ``param_a``/``param_b`` name the axes: ``"sig_f2"``, ``"sig_n2"``, or
    ``"ls[d]"`` for dimension d.  Ranges are (lo, hi) on the parameter's own
    scale; points are log-spaced by default.
    """

    param_a: str
    param_b: str
    range_a: tuple[float, float]
    range_b: tuple[float, float]
    resolution: int | tuple[int, int] = 30
    log_spaced: bool = True

    def axis_values(self):
        res = self.resolution
        na, nb = (res, res) if isinstance(res, int) else res
        if self.log_spaced:
            va = np.geomspace(self.range_a[0], self.range_a[1], na)
            vb = np.geomspace(self.range_b[0], self.range_b[1], nb)
        else:
            va = np.linspace(self.range_a[0], self.range_a[1], na)
            vb = np.linspace(self.range_b[0], self.range_b[1], nb)
        return va, vb


@dataclass
class SurfaceResult:
    axis_a: str
    axis_b: str
    values_a: np.ndarray
    values_b: np.ndarray
    neg_lml: np.ndarray  # shape (len(values_a), len(values_b)), row-major


def _parse_axis(name: str):
    if name in ("sig_f2", "sig_n2"):
        return name, None
    if name.startswith("ls[") and name.endswith("]"):
        return "ls", int(name[3:-1])
    raise ValueError(f"unknown grid axis {name!r}; use sig_f2, sig_n2 or ls[d]")


def _substitute(h: Hypers, name: str, value: float) -> Hypers:
    kind, dim = _parse_axis(name)
    ls = h.lengthscales.copy()
    sf, sn = h.signal_std, h.noise_std
    if kind == "sig_f2":
        sf = float(np.sqrt(value))
    elif kind == "sig_n2":
        sn = float(np.sqrt(value))
    else:
        ls[dim] = value
    return Hypers(ls, sf, sn)


def lml_surface(data: Dataset, grid_spec: GridSpec, fixed: Hypers) -> SurfaceResult:
    """Grid the negative log marginal likelihood over two hyperparameters.

    Cells whose factorization fails are marked NaN rather than aborting.
    """
    _parse_axis(grid_spec.param_a)
    _parse_axis(grid_spec.param_b)
    va, vb = grid_spec.axis_values()
    out = np.empty((va.size, vb.size))
    for i, a in enumerate(va):
        h_a = _substitute(fixed, grid_spec.param_a, a)
        for j, b in enumerate(vb):
            h_ab = _substitute(h_a, grid_spec.param_b, b)
            try:
                out[i, j] = -exact_lml(data, h_ab)
            except NumericalError:
                warnings.warn(
                    f"surface cell ({grid_spec.param_a}={a:g}, "
                    f"{grid_spec.param_b}={b:g}) failed to factorize"
                )
                out[i, j] = np.nan
    return SurfaceResult(grid_spec.param_a, grid_spec.param_b, va, vb, out)


def write_surface(path, surface: SurfaceResult) -> None:
    """Emit the surface as delimited text with axis metadata headers."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# axis_a={surface.axis_a} values="
            + ",".join(f"{v:.12g}" for v in surface.values_a)
            + "\n"
        )
        fh.write(
            f"# axis_b={surface.axis_b} values="
            + ",".join(f"{v:.12g}" for v in surface.values_b)
            + "\n"
        )
        for row in surface.neg_lml:
            fh.write("\t".join(f"{v:.12g}" for v in row) + "\n")
