"""Sparse Gaussian process regression with fully Bayesian hyperparameters.

The hyperparameter posterior is sampled with HMC from the optimal
variational density implied by the collapsed inducing-point bound, while
the inducing locations are optimized by gradient ascent on the resulting
stochastic objective.  Baselines (ML-II, exact-GP sampling, joint
whitened sampling, fixed inducing sets), mixture prediction, MCMC
diagnostics and a benchmark harness round out the toolkit.
"""

from .baselines import (
    exact_hmc_train,
    fixed_z_train,
    joint_hmc_target,
    joint_hmc_train,
    joint_mixture_predict,
    ml2_train,
)
from .data import Dataset, init_inducing, load_csv, split_standardize, synth1d_generate
from .diagnostics import (
    ChainSummary,
    autocorr,
    ess,
    ess_bulk,
    ess_tail,
    hdi,
    summarize,
    write_summary,
)
from .experiment import (
    BenchResult,
    ExperimentConfig,
    SplitRecord,
    run_experiment,
    run_single,
)
from .gp_exact import GridSpec, exact_lml, exact_lml_grad, exact_predict, lml_surface
from .hmc import (
    FlatPrior,
    HyperPrior,
    SamplerConfig,
    TargetDensity,
    Trace,
    default_prior,
    hmc_sample,
    leapfrog,
    log_prior,
    make_exact_target,
    make_target,
    read_trace,
    write_trace,
)
from .kernels import (
    Hypers,
    from_unconstrained,
    kernel_diag,
    kernel_eval,
    kernel_matrix,
    log_jacobian,
    to_unconstrained,
)
from .linalg import NumericalError
from .predict import MixturePredictive, destandardize, mixture_predict, nlpd, rmse
from .sgpr import collapsed_elbo, collapsed_elbo_grad, optimal_q_u, predict_fixed
from .trainer import (
    AdamState,
    TrainConfig,
    TrainedModel,
    adam_step,
    stochastic_elbo,
    stochastic_elbo_grad_z,
    train,
    warm_start,
)

__version__ = "0.1.0"
