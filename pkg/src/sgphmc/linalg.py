"""Cholesky helpers shared by the exact and sparse models.

Solves go through lower-triangular Cholesky factors; explicit inverses are
never formed.  Factorization failures raise :class:`NumericalError` with a
condition-number report so callers can decide whether to reject (samplers)
or abort (optimizers).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = ["NumericalError", "cholesky", "solve_lower", "solve_upper", "chol_solve"]

LOG_2PI = float(np.log(2.0 * np.pi))


class NumericalError(RuntimeError):
    """A matrix factorization failed beyond recoverable jitter."""


def cholesky(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of ``mat``; failure raises NumericalError
    naming the factor and reporting an estimated condition number."""
    try:
        return scipy.linalg.cholesky(mat, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        try:
            eig = np.linalg.eigvalsh(mat)
            cond = f"eig range [{eig.min():.3e}, {eig.max():.3e}]"
        except Exception:
            cond = "eigenvalues unavailable"
        raise NumericalError(f"Cholesky of {name} failed ({cond})") from exc


def solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return scipy.linalg.solve_triangular(L, b, lower=True, check_finite=False)


def solve_upper(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L^T x = b for lower-triangular L."""
    return scipy.linalg.solve_triangular(L, b, lower=True, trans="T", check_finite=False)


def chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b."""
    return solve_upper(L, solve_lower(L, b))
