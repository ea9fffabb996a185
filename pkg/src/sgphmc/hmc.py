"""Hamiltonian Monte Carlo over unconstrained hyperparameters.

The sampler targets the optimal variational density over the kernel
hyperparameters,

    log q*(theta) = elbo(theta, Z) + log p(theta) + const,

expressed on the log scale (so the exp-transform Jacobian is part of the
target).  Plain fixed-path-length leapfrog HMC with dual-averaging
step-size adaptation (Hoffman & Gelman, 2014) and an identity mass matrix;
proposals with non-finite or wildly wrong energy are flagged divergent and
rejected.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset
from .kernels import Hypers, from_unconstrained, log_jacobian, to_unconstrained
from .linalg import NumericalError
from .sgpr import collapsed_elbo_grad, make_workspace, _elbo_from_workspace

__all__ = [
    "HyperPrior",
    "FlatPrior",
    "default_prior",
    "gamma_all_prior",
    "log_prior",
    "TargetDensity",
    "make_target",
    "make_exact_target",
    "leapfrog",
    "SamplerConfig",
    "Trace",
    "hmc_sample",
    "SamplerFailure",
    "write_trace",
    "read_trace",
]

# energy error beyond which a trajectory counts as divergent
DIVERGENCE_THRESHOLD = 1000.0


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------

class HyperPrior:
    """Independent priors over (lengthscales, sig_f, sig_n).

    Each group is either ``("gamma", shape, rate)`` or
    ``("halfcauchy", scale)``.  Densities are on the constrained scale;
    gradients are returned with respect to the log-parameters (excluding
    the transform Jacobian, which the target adds separately).
    """

    def __init__(self, lengthscale_prior, signal_prior, noise_prior):
        self.groups = (lengthscale_prior, signal_prior, noise_prior)

    @staticmethod
    def _log_density_one(spec, x: np.ndarray) -> float:
        kind = spec[0]
        if kind == "gamma":
            _, shape, rate = spec
            from scipy.special import gammaln
            return float(np.sum(
                shape * np.log(rate) - gammaln(shape)
                + (shape - 1.0) * np.log(x) - rate * x
            ))
        if kind == "halfcauchy":
            _, scale = spec
            return float(np.sum(
                np.log(2.0 / (np.pi * scale)) - np.log1p((x / scale) ** 2)
            ))
        raise ValueError(f"unknown prior kind {kind!r}")

    @staticmethod
    def _dlog_dlogx_one(spec, x: np.ndarray) -> np.ndarray:
        # d log p / d log x = x * d log p / d x
        kind = spec[0]
        if kind == "gamma":
            _, shape, rate = spec
            return (shape - 1.0) - rate * x
        if kind == "halfcauchy":
            _, scale = spec
            r2 = (x / scale) ** 2
            return -2.0 * r2 / (1.0 + r2)
        raise ValueError(f"unknown prior kind {kind!r}")

    def log_density(self, h: Hypers) -> float:
        ls_p, sf_p, sn_p = self.groups
        return (
            self._log_density_one(ls_p, h.lengthscales)
            + self._log_density_one(sf_p, np.array([h.signal_std]))
            + self._log_density_one(sn_p, np.array([h.noise_std]))
        )

    def grad_unconstrained(self, h: Hypers) -> np.ndarray:
        ls_p, sf_p, sn_p = self.groups
        return np.concatenate([
            np.atleast_1d(self._dlog_dlogx_one(ls_p, h.lengthscales)),
            np.atleast_1d(self._dlog_dlogx_one(sf_p, np.array([h.signal_std]))),
            np.atleast_1d(self._dlog_dlogx_one(sn_p, np.array([h.noise_std]))),
        ])


class FlatPrior(HyperPrior):
    """Improper constant prior; handy for reducing targets in tests."""

    def __init__(self):
        super().__init__(None, None, None)

    def log_density(self, h: Hypers) -> float:
        return 0.0

    def grad_unconstrained(self, h: Hypers) -> np.ndarray:
        return np.zeros(h.input_dim + 2)


def default_prior() -> HyperPrior:
    """Gamma(2, 1) lengthscales, HalfCauchy(1) signal and noise."""
    return HyperPrior(("gamma", 2.0, 1.0), ("halfcauchy", 1.0), ("halfcauchy", 1.0))


def gamma_all_prior() -> HyperPrior:
    """Gamma(2, 1) on every hyperparameter (joint-sampling baseline)."""
    g = ("gamma", 2.0, 1.0)
    return HyperPrior(g, g, g)


def prior_by_name(name: str) -> HyperPrior:
    if name == "gamma-halfcauchy":
        return default_prior()
    if name == "gamma-all":
        return gamma_all_prior()
    raise ValueError(f"unknown prior choice {name!r}")


def log_prior(h: Hypers) -> float:
    """Log density of the default prior at ``h``."""
    return default_prior().log_density(h)


# ---------------------------------------------------------------------------
# target densities
# ---------------------------------------------------------------------------

@dataclass
class TargetDensity:
    """A differentiable unnormalized log density over R^dimension."""

    log_density: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    dimension: int

    def log_density_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        return self.log_density(x), self.grad(x)

    def check_grad(self, rng: np.random.Generator, points, scale=0.3,
                   rel_tol=1e-4) -> None:
        """Spot-check grad against central differences at random points."""
        for _ in range(points):
            x = rng.normal(scale=scale, size=self.dimension)
            g = self.grad(x)
            fd = np.zeros_like(g)
            for i in range(self.dimension):
                e = np.zeros(self.dimension)
                e[i] = 1e-5
                fd[i] = (self.log_density(x + e) - self.log_density(x - e)) / 2e-5
            err = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-6)
            if np.max(err) > rel_tol:
                raise AssertionError(
                    f"target gradient mismatch: max rel err {np.max(err):.2e}"
                )


def _guarded(fn_value, fn_grad, dim):
    """Wrap value/grad so numerical failures become -inf (rejected)."""

    def log_density(u):
        try:
            v = fn_value(u)
        except (NumericalError, FloatingPointError, OverflowError):
            return -np.inf
        return v if np.isfinite(v) else -np.inf

    def grad(u):
        try:
            return fn_grad(u)
        except (NumericalError, FloatingPointError, OverflowError):
            return np.zeros(dim)

    return log_density, grad


def make_target(
    data: Dataset, z: np.ndarray, prior: HyperPrior | None = None
) -> TargetDensity:
    """log q*(theta) (up to a constant) on the unconstrained scale:
    collapsed bound + log prior + transform Jacobian."""
    if prior is None:
        prior = default_prior()
    dim = data.input_dim + 2

    def value(u):
        h = from_unconstrained(u)
        ws = make_workspace(data, h, z)
        return _elbo_from_workspace(ws) + prior.log_density(h) + log_jacobian(u)

    def grad(u):
        h = from_unconstrained(u)
        grad_u, _ = collapsed_elbo_grad(data, h, z)
        return grad_u + prior.grad_unconstrained(h) + 1.0

    log_density, grad_fn = _guarded(value, grad, dim)
    return TargetDensity(log_density, grad_fn, dim)


def make_exact_target(
    data: Dataset, prior: HyperPrior | None = None
) -> TargetDensity:
    """Same construction against the exact log marginal likelihood
    (O(N^3) per evaluation); the dense-GP sampling baseline."""
    from .gp_exact import exact_lml, exact_lml_grad

    if prior is None:
        prior = default_prior()
    dim = data.input_dim + 2

    def value(u):
        h = from_unconstrained(u)
        return exact_lml(data, h) + prior.log_density(h) + log_jacobian(u)

    def grad(u):
        h = from_unconstrained(u)
        return exact_lml_grad(data, h) + prior.grad_unconstrained(h) + 1.0

    log_density, grad_fn = _guarded(value, grad, dim)
    return TargetDensity(log_density, grad_fn, dim)


# ---------------------------------------------------------------------------
# sampler
# ---------------------------------------------------------------------------

@dataclass
class SamplerConfig:
    n_samples: int = 100
    n_tune: int = 500
    target_accept: float = 0.8
    init_step_size: float = 0.1
    path_length_steps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_tune < 0 or self.n_samples < 1:
            raise ValueError("n_tune must be >= 0 and n_samples >= 1")
        if self.path_length_steps < 1:
            raise ValueError("path_length_steps must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.init_step_size <= 0:
            raise ValueError("init_step_size must be positive")


class SamplerFailure(RuntimeError):
    """Tuning diverged almost everywhere; carries the last state."""

    def __init__(self, message, last_state):
        super().__init__(message)
        self.last_state = last_state


@dataclass
class Trace:
    """Kept draws plus per-draw sampler statistics.

    ``samples`` is J x dim on the sampling (unconstrained) scale;
    ``exp_mask`` marks which columns are log-parameters, so
    :meth:`constrained` exponentiates exactly those.
    """

    samples: np.ndarray
    accept_prob: np.ndarray
    energy: np.ndarray          # potential energy (-log target) per draw
    divergent: np.ndarray
    step_size_history: np.ndarray
    final_step_size: float
    param_names: list[str]
    exp_mask: np.ndarray
    sampling_seconds: float = 0.0

    def __len__(self) -> int:
        return self.samples.shape[0]

    def constrained(self) -> np.ndarray:
        out = self.samples.copy()
        out[:, self.exp_mask] = np.exp(out[:, self.exp_mask])
        return out

    def hypers(self, j: int) -> Hypers:
        """Constrained hyperparameters for draw j (hyper-only traces)."""
        if not bool(np.all(self.exp_mask)):
            raise ValueError("trace has non-hyperparameter coordinates")
        return from_unconstrained(self.samples[j])

    def theta_subtrace(self, n_tail: int) -> "Trace":
        """Restrict to the trailing ``n_tail`` coordinates (the hyper block
        of a joint trace)."""
        return Trace(
            samples=self.samples[:, -n_tail:].copy(),
            accept_prob=self.accept_prob,
            energy=self.energy,
            divergent=self.divergent,
            step_size_history=self.step_size_history,
            final_step_size=self.final_step_size,
            param_names=self.param_names[-n_tail:],
            exp_mask=self.exp_mask[-n_tail:],
            sampling_seconds=self.sampling_seconds,
        )


def hyper_param_names(input_dim: int) -> list[str]:
    return [f"ls[{d}]" for d in range(input_dim)] + ["sig_f", "sig_n"]


def leapfrog(
    position: np.ndarray,
    momentum: np.ndarray,
    target: TargetDensity,
    step_size: float,
    n_steps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Standard leapfrog integrator with identity mass matrix; the final
    momentum is negated so the map is an involution."""
    q = position.copy()
    p = momentum + 0.5 * step_size * target.grad(position)
    for i in range(n_steps):
        q = q + step_size * p
        g = target.grad(q)
        if i < n_steps - 1:
            p = p + step_size * g
    p = p + 0.5 * step_size * g
    return q, -p


def _potential(target: TargetDensity, q: np.ndarray) -> float:
    return -target.log_density(q)


class _DualAveraging:
    """Step-size adaptation toward a target acceptance statistic."""

    def __init__(self, init_step, target_accept, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = np.log(10.0 * init_step)
        self.target = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.h_bar = 0.0
        self.log_eps_bar = 0.0
        self.t = 0
        self.log_eps = np.log(init_step)

    def update(self, accept_stat: float) -> float:
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat)
        self.log_eps = self.mu - np.sqrt(self.t) / self.gamma * self.h_bar
        weight = self.t ** (-self.kappa)
        self.log_eps_bar = weight * self.log_eps + (1.0 - weight) * self.log_eps_bar
        return float(np.exp(self.log_eps))

    def adapted_step(self) -> float:
        return float(np.exp(self.log_eps_bar))


def hmc_sample(
    target: TargetDensity, config: SamplerConfig, init: np.ndarray,
    param_names: list[str] | None = None,
    exp_mask: np.ndarray | None = None,
) -> Trace:
    """Run one HMC chain: ``n_tune`` dual-averaging iterations (discarded)
    followed by ``n_samples`` kept draws at the adapted step size."""
    rng = np.random.default_rng(config.seed)
    q = np.asarray(init, dtype=float).copy()
    if q.shape[0] != target.dimension:
        raise ValueError("init dimension does not match target")
    u_q = _potential(target, q)
    if not np.isfinite(u_q):
        raise ValueError("initial point has non-finite target density")

    if param_names is None:
        param_names = [f"x[{i}]" for i in range(target.dimension)]
    if exp_mask is None:
        exp_mask = np.ones(target.dimension, dtype=bool)

    adapt = _DualAveraging(config.init_step_size, config.target_accept)
    step = config.init_step_size
    step_history = np.empty(config.n_tune)
    n_div_tune = 0

    def transition(q, u_q, step):
        """One proposal; returns (q, u_q, accept_stat, accepted, divergent)."""
        p0 = rng.standard_normal(target.dimension)
        h0 = u_q + 0.5 * p0 @ p0
        with np.errstate(over="ignore", invalid="ignore"):
            q1, p1 = leapfrog(q, p0, target, step, config.path_length_steps)
            if not np.all(np.isfinite(q1)):
                return q, u_q, 0.0, False, True
            u1 = _potential(target, q1)
            h1 = u1 + 0.5 * p1 @ p1
            d_h = h1 - h0
        if not np.isfinite(d_h) or d_h > DIVERGENCE_THRESHOLD:
            return q, u_q, 0.0, False, True
        accept_stat = min(1.0, float(np.exp(-d_h)))
        if rng.uniform() < accept_stat:
            return q1, u1, accept_stat, True, False
        return q, u_q, accept_stat, False, False

    for t in range(config.n_tune):
        q, u_q, stat, _, div = transition(q, u_q, step)
        n_div_tune += div
        step = adapt.update(stat)
        step_history[t] = step
    if config.n_tune > 0:
        if n_div_tune >= 0.9 * config.n_tune:
            raise SamplerFailure(
                f"{n_div_tune}/{config.n_tune} tuning iterations diverged", q
            )
        step = adapt.adapted_step()
    if not np.isfinite(step) or step <= 0:
        raise SamplerFailure(f"adapted step size is {step}", q)

    dim = target.dimension
    samples = np.empty((config.n_samples, dim))
    accept = np.empty(config.n_samples)
    energy = np.empty(config.n_samples)
    divergent = np.zeros(config.n_samples, dtype=bool)
    t_start = time.perf_counter()
    for j in range(config.n_samples):
        q, u_q, stat, _, div = transition(q, u_q, step)
        samples[j] = q
        accept[j] = stat
        energy[j] = u_q
        divergent[j] = div
    sampling_seconds = time.perf_counter() - t_start

    return Trace(
        samples=samples,
        accept_prob=accept,
        energy=energy,
        divergent=divergent,
        step_size_history=step_history,
        final_step_size=step,
        param_names=list(param_names),
        exp_mask=np.asarray(exp_mask, dtype=bool),
        sampling_seconds=sampling_seconds,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_trace(path, trace: Trace) -> None:
    """One row per draw: constrained parameter values, acceptance
    statistic, and potential energy, tab-delimited with a header."""
    cons = trace.constrained()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(trace.param_names + ["accept_prob", "energy"]) + "\n")
        for j in range(len(trace)):
            row = list(cons[j]) + [trace.accept_prob[j], trace.energy[j]]
            fh.write("\t".join(f"{v:.17g}" for v in row) + "\n")


def read_trace(path) -> Trace:
    """Read a trace written by :func:`write_trace`.  Parameter columns are
    assumed to be positive (hyperparameter) coordinates."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split("\t")
        rows = [list(map(float, ln.split("\t"))) for ln in fh if ln.strip()]
    if header[-2:] != ["accept_prob", "energy"]:
        raise ValueError("not a trace file: missing accept_prob/energy columns")
    names = header[:-2]
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0 or arr.shape[1] != len(header):
        raise ValueError("trace file is empty or ragged")
    values = arr[:, : len(names)]
    if np.any(values <= 0):
        raise ValueError("constrained trace values must be positive")
    j = values.shape[0]
    return Trace(
        samples=np.log(values),
        accept_prob=arr[:, -2],
        energy=arr[:, -1],
        divergent=np.zeros(j, dtype=bool),
        step_size_history=np.empty(0),
        final_step_size=float("nan"),
        param_names=names,
        exp_mask=np.ones(len(names), dtype=bool),
    )
