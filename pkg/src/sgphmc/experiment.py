"""Benchmark harness: experiment configuration, per-split method
dispatch, metric aggregation, and the delimited-text report formats.

The protocol per split: seeded shuffle into train/test, standardization
with training statistics, hyperparameters initialised at log(2) on the
constrained scale, inducing locations at a seeded random subset of
training rows, then the configured method.  RMSE and NLPD are computed on
de-standardized test targets; wall clocks record the whole split and the
sample-drawing phase (tuning excluded) separately.
"""

from __future__ import annotations

import configparser
import os
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (
    exact_hmc_train,
    fixed_z_train,
    joint_hmc_train,
    joint_mixture_predict,
    ml2_train,
)
from .data import Dataset, init_inducing, load_csv, split_standardize
from .gp_exact import exact_predict
from .hmc import SamplerConfig, Trace, prior_by_name
from .kernels import Hypers
from .predict import MixturePredictive, mixture_from_components, mixture_predict, nlpd, rmse
from .sgpr import predict_fixed
from .trainer import TrainConfig, train

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "SplitRecord",
    "BenchResult",
    "run_experiment",
    "run_single",
    "write_split_report",
    "write_bench_report",
    "write_manifest",
    "read_config",
]

METHODS = ("sgpr-ml2", "sgpr-hmc", "gpr-hmc", "joint-hmc", "fixed-z")

INIT_HYPER = float(np.log(2.0))


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    method: str = "sgpr-hmc"
    m_inducing: int = 100
    fraction: float = 0.8
    n_splits: int = 10
    seed: int = 0
    prior: str = "gamma-halfcauchy"
    ml2_steps: int = 1000
    out_dir: str | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; choose from {METHODS}"
            )
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("fraction must lie in (0, 1)")
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")


@dataclass
class SplitRecord:
    split: int
    method: str
    m_inducing: int
    n_samples: int
    rmse: float
    nlpd: float
    wall_total_s: float
    wall_sampling_s: float
    failed: bool = False
    error: str = ""


@dataclass
class BenchResult:
    dataset: str
    method: str
    m_inducing: int
    records: list[SplitRecord]
    rmse_mean: float
    rmse_sem: float | None
    nlpd_mean: float
    nlpd_sem: float | None
    wall_total_s: float
    wall_sampling_s: float
    n_completed: int


def _split_seed(seed: int, split_index: int) -> int:
    return int(np.random.SeedSequence([seed, split_index]).generate_state(1)[0])


def run_single(
    cfg: ExperimentConfig,
    train_ds: Dataset,
    test_ds: Dataset,
    split_index: int = 0,
):
    """Run one method on one prepared split.

    Returns (record, extras); extras carries the trace / inducing set /
    hypers that the ``fit`` command serializes.
    """
    method = cfg.method
    seed = _split_seed(cfg.seed, split_index)
    h0 = Hypers.default(train_ds.input_dim, INIT_HYPER)
    z0 = init_inducing(train_ds, cfg.m_inducing, seed)
    prior = prior_by_name(cfg.prior)
    tcfg = replace(cfg.train, seed=seed)
    scfg = replace(cfg.sampler, seed=seed)
    extras: dict = {"z": z0}

    t0 = time.perf_counter()
    wall_sampling = 0.0

    if method == "sgpr-ml2":
        h, z = ml2_train(train_ds, h0, z0, cfg.ml2_steps, cfg.train.adam_lr)
        mu, var = predict_fixed(train_ds, h, z, test_ds.X,
                                include_noise=True, full_cov=False)
        pred = mixture_from_components(mu[None, :], var[None, :], train_ds, True)
        extras.update(z=z, hypers=h)
    elif method == "sgpr-hmc":
        model = train(train_ds, h0, z0, tcfg, prior)
        pred = mixture_predict(train_ds, model.z_opt, model.trace, test_ds.X,
                               include_noise=True)
        wall_sampling = model.sampling_seconds
        extras.update(z=model.z_opt, trace=model.trace, model=model)
    elif method == "fixed-z":
        model = fixed_z_train(train_ds, h0, z0, tcfg, prior)
        pred = mixture_predict(train_ds, model.z_opt, model.trace, test_ds.X,
                               include_noise=True)
        wall_sampling = model.sampling_seconds
        extras.update(z=model.z_opt, trace=model.trace, model=model)
    elif method == "gpr-hmc":
        trace = exact_hmc_train(train_ds, h0, scfg, prior)
        means, var_diags = [], []
        for j in range(len(trace)):
            h = trace.hypers(j)
            mu, cov = exact_predict(train_ds, h, test_ds.X, include_noise=True)
            means.append(mu)
            var_diags.append(np.diag(cov))
        pred = mixture_from_components(np.asarray(means), np.asarray(var_diags),
                                       train_ds, True)
        wall_sampling = trace.sampling_seconds
        extras.update(trace=trace)
    elif method == "joint-hmc":
        z, trace = joint_hmc_train(train_ds, h0, z0, scfg,
                                   warm_steps=100, lr=cfg.train.adam_lr,
                                   prior=prior_by_name("gamma-all"))
        pred = joint_mixture_predict(train_ds, z, trace, test_ds.X,
                                     include_noise=True)
        wall_sampling = trace.sampling_seconds
        extras.update(z=z, trace=trace)
    else:  # pragma: no cover - guarded by ExperimentConfig
        raise ValueError(method)

    wall_total = time.perf_counter() - t0
    y_true = test_ds.y_original()
    record = SplitRecord(
        split=split_index,
        method=method,
        m_inducing=cfg.m_inducing,
        n_samples=pred.n_components,
        rmse=rmse(y_true, pred.point_prediction()),
        nlpd=nlpd(y_true, pred),
        wall_total_s=wall_total,
        wall_sampling_s=wall_sampling,
    )
    extras["pred"] = pred
    return record, extras


def run_experiment(cfg: ExperimentConfig, raw: np.ndarray | None = None) -> BenchResult:
    """Run the configured method over all splits and aggregate.

    ``raw`` (an N x (D+1) matrix, last column the target) overrides the
    CSV path; per-split failures are recorded and excluded from the
    aggregate, but more than 20% failed splits abort the run.
    """
    if raw is None:
        if cfg.dataset is None:
            raise ValueError("either cfg.dataset or raw data must be provided")
        raw, _ = load_csv(cfg.dataset)
    dataset_name = os.path.basename(cfg.dataset) if cfg.dataset else "in-memory"

    records: list[SplitRecord] = []
    for s in range(cfg.n_splits):
        train_ds, test_ds = split_standardize(raw, cfg.fraction, cfg.seed, s)
        try:
            rec, _ = run_single(cfg, train_ds, test_ds, split_index=s)
        except Exception as exc:  # noqa: BLE001 - per-split fault isolation
            warnings.warn(f"split {s} failed: {exc}")
            rec = SplitRecord(
                split=s, method=cfg.method, m_inducing=cfg.m_inducing,
                n_samples=0, rmse=float("nan"), nlpd=float("nan"),
                wall_total_s=float("nan"), wall_sampling_s=float("nan"),
                failed=True, error=str(exc),
            )
        records.append(rec)

    done = [r for r in records if not r.failed]
    n_failed = len(records) - len(done)
    if n_failed > int(0.2 * cfg.n_splits):
        raise RuntimeError(
            f"{n_failed}/{cfg.n_splits} splits failed; aborting benchmark"
        )
    rmses = np.array([r.rmse for r in done])
    nlpds = np.array([r.nlpd for r in done])
    k = len(done)
    sem = (lambda v: float(np.std(v, ddof=1) / np.sqrt(k))) if k > 1 else None
    return BenchResult(
        dataset=dataset_name,
        method=cfg.method,
        m_inducing=cfg.m_inducing,
        records=records,
        rmse_mean=float(rmses.mean()),
        rmse_sem=sem(rmses) if sem else None,
        nlpd_mean=float(nlpds.mean()),
        nlpd_sem=sem(nlpds) if sem else None,
        wall_total_s=float(np.sum([r.wall_total_s for r in done])),
        wall_sampling_s=float(np.sum([r.wall_sampling_s for r in done])),
        n_completed=k,
    )


# ---------------------------------------------------------------------------
# report and config files
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_split_report(path, dataset: str, records: list[SplitRecord]) -> None:
    """Per-split metric rows."""
    cols = ["dataset", "split", "method", "M", "J", "rmse", "nlpd",
            "wall_total_s", "wall_sampling_s", "failed"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in records:
            fh.write("\t".join(_fmt(v) for v in (
                dataset, r.split, r.method, r.m_inducing, r.n_samples,
                r.rmse, r.nlpd, r.wall_total_s, r.wall_sampling_s,
                int(r.failed),
            )) + "\n")


def write_bench_report(path, results: list[BenchResult]) -> None:
    """Aggregate rows, one per (dataset, method)."""
    cols = ["dataset", "method", "M", "rmse_mean", "rmse_sem",
            "nlpd_mean", "nlpd_sem", "wall_total_s", "wall_sampling_s"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in results:
            fh.write("\t".join(_fmt(v) for v in (
                r.dataset, r.method, r.m_inducing,
                r.rmse_mean, r.rmse_sem, r.nlpd_mean, r.nlpd_sem,
                r.wall_total_s, r.wall_sampling_s,
            )) + "\n")


def config_to_parser(cfg: ExperimentConfig) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        "dataset": cfg.dataset or "",
        "method": cfg.method,
        "m_inducing": str(cfg.m_inducing),
        "fraction": repr(cfg.fraction),
        "n_splits": str(cfg.n_splits),
        "seed": str(cfg.seed),
        "prior": cfg.prior,
        "ml2_steps": str(cfg.ml2_steps),
        "out_dir": cfg.out_dir or "",
    }
    t = cfg.train
    parser["train"] = {
        "warm_start_steps": str(t.warm_start_steps),
        "total_steps": str(t.total_steps),
        "sample_interval": str(t.sample_interval),
        "samples_per_window": str(t.samples_per_window),
        "first_window_samples": str(t.first_window_samples),
        "first_window_tune": str(t.first_window_tune),
        "later_window_tune": str(t.later_window_tune),
        "final_samples": str(t.final_samples),
        "adam_lr": repr(t.adam_lr),
        "target_accept": repr(t.target_accept),
        "path_length_steps": str(t.path_length_steps),
        "init_step_size": repr(t.init_step_size),
    }
    s = cfg.sampler
    parser["sampler"] = {
        "n_samples": str(s.n_samples),
        "n_tune": str(s.n_tune),
        "target_accept": repr(s.target_accept),
        "init_step_size": repr(s.init_step_size),
        "path_length_steps": str(s.path_length_steps),
    }
    return parser


def write_manifest(path, cfg: ExperimentConfig) -> None:
    """Resolved configuration in the same key=value format as the input."""
    with open(path, "w", encoding="utf-8") as fh:
        config_to_parser(cfg).write(fh)


def read_config(path) -> ExperimentConfig:
    """Read a key=value config file (sections: experiment, train, sampler);
    missing keys keep their defaults."""
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    cfg = ExperimentConfig()
    if parser.has_section("experiment"):
        e = parser["experiment"]
        cfg = replace(
            cfg,
            dataset=e.get("dataset", "") or None,
            method=e.get("method", cfg.method),
            m_inducing=e.getint("m_inducing", cfg.m_inducing),
            fraction=e.getfloat("fraction", cfg.fraction),
            n_splits=e.getint("n_splits", cfg.n_splits),
            seed=e.getint("seed", cfg.seed),
            prior=e.get("prior", cfg.prior),
            ml2_steps=e.getint("ml2_steps", cfg.ml2_steps),
            out_dir=e.get("out_dir", "") or None,
        )
    if parser.has_section("train"):
        t = parser["train"]
        d = cfg.train
        cfg = replace(cfg, train=replace(
            d,
            warm_start_steps=t.getint("warm_start_steps", d.warm_start_steps),
            total_steps=t.getint("total_steps", d.total_steps),
            sample_interval=t.getint("sample_interval", d.sample_interval),
            samples_per_window=t.getint("samples_per_window", d.samples_per_window),
            first_window_samples=t.getint("first_window_samples",
                                          d.first_window_samples),
            first_window_tune=t.getint("first_window_tune", d.first_window_tune),
            later_window_tune=t.getint("later_window_tune", d.later_window_tune),
            final_samples=t.getint("final_samples", d.final_samples),
            adam_lr=t.getfloat("adam_lr", d.adam_lr),
            target_accept=t.getfloat("target_accept", d.target_accept),
            path_length_steps=t.getint("path_length_steps", d.path_length_steps),
            init_step_size=t.getfloat("init_step_size", d.init_step_size),
        ))
    if parser.has_section("sampler"):
        s = parser["sampler"]
        d = cfg.sampler
        cfg = replace(cfg, sampler=replace(
            d,
            n_samples=s.getint("n_samples", d.n_samples),
            n_tune=s.getint("n_tune", d.n_tune),
            target_accept=s.getfloat("target_accept", d.target_accept),
            init_step_size=s.getfloat("init_step_size", d.init_step_size),
            path_length_steps=s.getint("path_length_steps", d.path_length_steps),
        ))
    return cfg
