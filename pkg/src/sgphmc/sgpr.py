"""Sparse GP regression with inducing points: the collapsed variational
lower bound on log p(y | theta), its analytic gradients with respect to
the (unconstrained) kernel hyperparameters and the inducing locations Z,
the optimal inducing posterior, and fixed-hyperparameter prediction.

With Q = Knm Kmm^{-1} Kmn, the bound is

    elbo(theta, Z) = log N(y; 0, Q + sig_n^2 I)
                     - 1/(2 sig_n^2) tr(Knn - Q)

and is evaluated in O(N M^2) through two Cholesky factors, never forming
an N x N matrix:

    Lm   = chol(Kmm + jitter I)
    U    = Lm^{-1} Kmn                      (M x N)
    B    = I + U U^T / sig_n^2,  LB = chol(B)

which give  log|Q + sig^2 I| = N log sig^2 + 2 sum log diag LB  and
y^T (Q + sig^2 I)^{-1} y = (y.y - ||LB^{-1} U y||^2 / sig^2) / sig^2.

Gradients are exact matrix calculus through the same factors (no
automatic differentiation); the finite-difference counterpart lives in
the test suite as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .kernels import (
    Hypers,
    jitter_value,
    kernel_matrix,
    to_unconstrained,
)
from .linalg import LOG_2PI, cholesky, solve_lower, solve_upper

__all__ = [
    "SgprWorkspace",
    "make_workspace",
    "collapsed_elbo",
    "collapsed_elbo_grad",
    "optimal_q_u",
    "predict_fixed",
]


def _check_inducing(z: np.ndarray, dim: int) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != dim:
        raise ValueError(f"inducing set has {z.shape[1]} columns, expected {dim}")
    if z.shape[0] < 1:
        raise ValueError("inducing set must contain at least one row")
    return z


@dataclass
class SgprWorkspace:
    """Factorizations shared by the bound, its gradients, q*(u) and
    prediction, all tied to one (hypers, Z, dataset) triple."""

    data: Dataset
    h: Hypers
    z: np.ndarray
    Kmm: np.ndarray        # jittered, M x M
    Kmn: np.ndarray        # M x N
    Lm: np.ndarray         # chol(Kmm)
    U: np.ndarray          # Lm^{-1} Kmn
    B: np.ndarray          # I + U U^T / sig^2
    LB: np.ndarray         # chol(B)
    Uy: np.ndarray         # U y
    w: np.ndarray          # LB^{-1} U y
    sigma2: float
    tr_knn: float
    tr_q: float

    @property
    def m(self) -> int:
        return self.z.shape[0]


def make_workspace(data: Dataset, h: Hypers, z: np.ndarray) -> SgprWorkspace:
    z = _check_inducing(z, data.input_dim)
    m = z.shape[0]
    Kmm = kernel_matrix(z, z, h) + jitter_value(h) * np.eye(m)
    Kmn = kernel_matrix(z, data.X, h)
    Lm = cholesky(Kmm, name="Kmm")
    U = solve_lower(Lm, Kmn)
    sigma2 = h.noise_std**2
    B = np.eye(m) + (U @ U.T) / sigma2
    LB = cholesky(B, name="I + U U^T / sig_n^2")
    Uy = U @ data.y
    w = solve_lower(LB, Uy)
    return SgprWorkspace(
        data=data, h=h, z=z, Kmm=Kmm, Kmn=Kmn, Lm=Lm, U=U, B=B, LB=LB,
        Uy=Uy, w=w, sigma2=sigma2,
        tr_knn=data.n * h.signal_std**2,
        tr_q=float(np.sum(U * U)),
    )


def _elbo_from_workspace(ws: SgprWorkspace) -> float:
    n = ws.data.n
    y = ws.data.y
    s2 = ws.sigma2
    logdet = n * np.log(s2) + 2.0 * np.sum(np.log(np.diag(ws.LB)))
    quad = (y @ y - (ws.w @ ws.w) / s2) / s2
    fit = -0.5 * (n * LOG_2PI + logdet + quad)
    trace_term = -(ws.tr_knn - ws.tr_q) / (2.0 * s2)
    return float(fit + trace_term)


def collapsed_elbo(
    data: Dataset, h: Hypers, z: np.ndarray, workspace: SgprWorkspace | None = None
) -> float:
    """Collapsed variational lower bound on the exact log marginal
    likelihood; equality holds when Z = X."""
    ws = workspace if workspace is not None else make_workspace(data, h, z)
    return _elbo_from_workspace(ws)


def _weighted_sqdist_sums(W: np.ndarray, A: np.ndarray, Bp: np.ndarray) -> np.ndarray:
    """For each dimension d: sum_ij W[i,j] (A[i,d] - Bp[j,d])^2."""
    t1 = W.sum(axis=1) @ (A**2)
    t2 = np.sum(A * (W @ Bp), axis=0)
    t3 = W.sum(axis=0) @ (Bp**2)
    return t1 - 2.0 * t2 + t3


def collapsed_elbo_grad(
    data: Dataset, h: Hypers, z: np.ndarray, workspace: SgprWorkspace | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of the collapsed bound.

    Returns ``(grad_u, grad_z)``: the (D+2,) gradient with respect to
    (log ls_1..D, log sig_f, log sig_n), and the (M, D) gradient with
    respect to the inducing locations.
    """
    ws = workspace if workspace is not None else make_workspace(data, h, z)
    X, Z, y = data.X, ws.z, data.y
    n, m, d = data.n, ws.m, h.input_dim
    s2 = ws.sigma2

    # alpha = (Q + sig^2 I)^{-1} y via Woodbury through LB
    Binv_Uy = solve_upper(ws.LB, ws.w)
    alpha = (y - ws.U.T @ Binv_Uy / s2) / s2
    t = ws.U @ alpha
    g = solve_upper(ws.Lm, t)

    LBinv_U = solve_lower(ws.LB, ws.U)
    tr_Ginv = (n - np.sum(LBinv_U * LBinv_U) / s2) / s2
    tr_Xi = alpha @ alpha - tr_Ginv

    # adjoints of the bound w.r.t. Knm (N x M), the jittered Kmm, and sig^2
    Lm_inv = solve_lower(ws.Lm, np.eye(m))
    Binv = solve_upper(ws.LB, solve_lower(ws.LB, np.eye(m)))
    C_nm = np.outer(alpha, g) + (ws.U.T @ ((np.eye(m) - Binv) @ Lm_inv)) / s2
    mid = ws.B + Binv - 2.0 * np.eye(m)
    C_mm = -0.5 * (np.outer(g, g) + Lm_inv.T @ mid @ Lm_inv)
    c_s2 = 0.5 * tr_Xi + (ws.tr_knn - ws.tr_q) / (2.0 * s2 * s2)

    W_nm = C_nm * ws.Kmn.T
    W_mm = C_mm * ws.Kmm

    grad_u = np.empty(d + 2)
    grad_u[:d] = (
        _weighted_sqdist_sums(W_nm, X, Z) + _weighted_sqdist_sums(W_mm, Z, Z)
    ) / h.lengthscales**2
    grad_u[d] = (
        2.0 * np.sum(W_nm) + 2.0 * np.sum(W_mm) - ws.tr_knn / s2
    )
    grad_u[d + 1] = 2.0 * s2 * c_s2

    Wsym = W_mm + W_mm.T
    grad_z = (
        W_nm.T @ X - W_nm.sum(axis=0)[:, None] * Z
        + Wsym @ Z - Wsym.sum(axis=1)[:, None] * Z
    ) / h.lengthscales**2
    return grad_u, grad_z


def optimal_q_u(
    data: Dataset, h: Hypers, z: np.ndarray, workspace: SgprWorkspace | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the optimal Gaussian posterior over the
    inducing values:

        S* = Kmm (Kmm + sig^{-2} Kmn Knm)^{-1} Kmm
        m* = sig^{-2} Kmm (Kmm + sig^{-2} Kmn Knm)^{-1} Kmn y
    """
    ws = workspace if workspace is not None else make_workspace(data, h, z)
    m_star = ws.Lm @ solve_upper(ws.LB, ws.w) / ws.sigma2
    R = solve_lower(ws.LB, ws.Lm.T)
    S_star = R.T @ R
    return m_star, 0.5 * (S_star + S_star.T)


def predict_fixed(
    data: Dataset,
    h: Hypers,
    z: np.ndarray,
    X_star: np.ndarray,
    include_noise: bool = False,
    full_cov: bool = True,
    workspace: SgprWorkspace | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse posterior predictive at fixed hyperparameters.

    mean = A m*,  cov = K** + A (S* - Kmm) A^T  with  A = K*m Kmm^{-1}.
    With ``full_cov=False`` the second return value is the (P,) diagonal
    only, which is what the mixture predictive consumes.
    """
    ws = workspace if workspace is not None else make_workspace(data, h, z)
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    p = X_star.shape[0]
    Kms = kernel_matrix(ws.z, X_star, h)          # M x P
    Us = solve_lower(ws.Lm, Kms)
    mean = Us.T @ solve_upper(ws.LB, ws.w) / ws.sigma2
    LBinv_Us = solve_lower(ws.LB, Us)
    noise = h.noise_std**2 if include_noise else 0.0
    if full_cov:
        Kss = kernel_matrix(X_star, X_star, h)
        cov = Kss - Us.T @ Us + LBinv_Us.T @ LBinv_Us
        cov = 0.5 * (cov + cov.T)
        np.fill_diagonal(cov, np.maximum(np.diag(cov), 0.0))
        if include_noise:
            cov = cov + noise * np.eye(p)
        return mean, cov
    var = (
        np.full(p, h.signal_std**2)
        - np.sum(Us * Us, axis=0)
        + np.sum(LBinv_Us * LBinv_Us, axis=0)
    )
    return mean, np.maximum(var, 0.0) + noise
