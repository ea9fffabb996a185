"""RBF-ARD kernel, kernel-matrix construction, and the log-space
hyperparameter transform.

The kernel is

    k(x, x') = sig_f^2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / ls_d^2)

with one lengthscale per input dimension, a signal standard deviation
``sig_f`` and an observation-noise standard deviation ``sig_n``.  All three
groups live on the positive half-line; samplers and optimizers work on the
unconstrained vector (log ls_1..log ls_D, log sig_f, log sig_n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Hypers",
    "kernel_eval",
    "kernel_matrix",
    "kernel_diag",
    "to_unconstrained",
    "from_unconstrained",
    "log_jacobian",
    "jitter_value",
]

# Scale-aware diagonal jitter added to Kmm before factorization, as a
# fraction of sig_f^2.  1e-8 is appropriate for float64 (1e-6 is the
# usual float32 choice) and keeps the Kmm=Knn collapse identity tight.
JITTER_REL = 1e-8

# |log param| beyond this is rejected: far outside any posterior, and kept
# small enough that fourth powers of the parameters stay inside float64.
_MAX_LOG = 150.0


@dataclass
class Hypers:
    """Kernel hyperparameters on the constrained (positive) scale.

    Parameters
    ----------
    lengthscales : (D,) array
        One positive lengthscale per input dimension, in input units.
    signal_std : float
        Positive signal standard deviation sig_f, in output units.
    noise_std : float
        Positive observation-noise standard deviation sig_n, output units.
    """

    lengthscales: np.ndarray
    signal_std: float
    noise_std: float

    def __post_init__(self):
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        self.signal_std = float(self.signal_std)
        self.noise_std = float(self.noise_std)
        if self.lengthscales.ndim != 1:
            raise ValueError("lengthscales must be a 1-D array")
        if not np.all(self.lengthscales > 0):
            raise ValueError("all lengthscales must be strictly positive")
        if not self.signal_std > 0:
            raise ValueError("signal_std must be strictly positive")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be strictly positive")

    @property
    def input_dim(self) -> int:
        return self.lengthscales.shape[0]

    @classmethod
    def default(cls, input_dim: int, value: float = float(np.log(2.0))) -> "Hypers":
        """All fields initialised to the same constrained value (default log 2)."""
        return cls(np.full(input_dim, value), value, value)


def _check_dims(X: np.ndarray, h: Hypers, name: str) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != h.input_dim:
        raise ValueError(
            f"{name} has {X.shape[1]} columns but hypers expect {h.input_dim}"
        )
    return X


def kernel_eval(x: np.ndarray, x_prime: np.ndarray, h: Hypers) -> float:
    """Evaluate k(x, x') for a single pair of D-vectors."""
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape[0] != h.input_dim or x_prime.shape[0] != h.input_dim:
        raise ValueError("input dimension does not match hyperparameters")
    d = (x - x_prime) / h.lengthscales
    return h.signal_std**2 * float(np.exp(-0.5 * np.dot(d, d)))


def kernel_matrix(X: np.ndarray, X_prime: np.ndarray, h: Hypers) -> np.ndarray:
    """Cross-covariance matrix with entry (i, j) = k(X[i], X_prime[j])."""
    X = _check_dims(X, h, "X")
    X_prime = _check_dims(X_prime, h, "X_prime")
    A = X / h.lengthscales
    B = X_prime / h.lengthscales
    # ||a-b||^2 = ||a||^2 + ||b||^2 - 2 a.b, clipped against round-off
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(sq, 0.0, out=sq)
    return h.signal_std**2 * np.exp(-0.5 * sq)


def kernel_diag(X: np.ndarray, h: Hypers) -> np.ndarray:
    """diag k(X, X); every entry is sig_f^2 for a stationary kernel."""
    X = _check_dims(X, h, "X")
    return np.full(X.shape[0], h.signal_std**2)


def jitter_value(h: Hypers) -> float:
    """Diagonal stabilizer added to Kmm before Cholesky factorization."""
    return JITTER_REL * h.signal_std**2


def to_unconstrained(h: Hypers) -> np.ndarray:
    """Map to the (D+2,) vector (log ls, log sig_f, log sig_n)."""
    return np.log(
        np.concatenate([h.lengthscales, [h.signal_std, h.noise_std]])
    )


def from_unconstrained(u: np.ndarray) -> Hypers:
    """Inverse of :func:`to_unconstrained`; raises on overflow-sized input."""
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] < 3:
        raise ValueError("unconstrained vector needs at least 3 entries")
    if np.any(np.abs(u) > _MAX_LOG) or not np.all(np.isfinite(u)):
        raise FloatingPointError("unconstrained hypers out of exp() range")
    v = np.exp(u)
    return Hypers(v[:-2], v[-2], v[-1])


def log_jacobian(u: np.ndarray) -> float:
    """Log-determinant of d(exp u)/du, i.e. the density correction when
    sampling positive parameters on the log scale."""
    return float(np.sum(np.asarray(u, dtype=float)))
