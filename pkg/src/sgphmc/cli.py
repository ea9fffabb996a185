"""Command-line entry points.

Subcommands: ``fit`` (one method, one split), ``bench`` (full multi-split
benchmark), ``surface`` (negative-LML grid), ``diagnose`` (summarize a
saved trace), ``synth1d`` (the 1-D three-method comparison).  Every run
writes a manifest with the fully resolved configuration.  The RNG seed
can also be set through the GP_SEED environment variable; --seed wins.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .data import load_csv, split_standardize, synth1d_generate
from .diagnostics import summarize, write_summary
from .experiment import (
    METHODS,
    ExperimentConfig,
    read_config,
    run_experiment,
    run_single,
    write_bench_report,
    write_manifest,
    write_split_report,
)
from .gp_exact import GridSpec, lml_surface, write_surface
from .hmc import read_trace, write_trace
from .kernels import Hypers
from .trainer import write_training_log


def _base_config(args) -> ExperimentConfig:
    cfg = read_config(args.config) if args.config else ExperimentConfig()
    seed = cfg.seed
    if os.environ.get("GP_SEED"):
        seed = int(os.environ["GP_SEED"])
    if args.seed is not None:
        seed = args.seed
    return replace(cfg, seed=seed)


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_z(path, z: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(z):
            fh.write("\t".join(f"{v:.17g}" for v in row) + "\n")


def _write_hypers(path, h: Hypers) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d, v in enumerate(h.lengthscales):
            fh.write(f"ls[{d}]\t{v:.17g}\n")
        fh.write(f"sig_f\t{h.signal_std:.17g}\n")
        fh.write(f"sig_n\t{h.noise_std:.17g}\n")


def cmd_fit(args) -> int:
    cfg = _base_config(args)
    cfg = replace(cfg, dataset=args.data or cfg.dataset,
                  method=args.method or cfg.method,
                  m_inducing=args.m or cfg.m_inducing)
    if cfg.dataset is None:
        print("fit: no dataset given (use --data)", file=sys.stderr)
        return 2
    out = _outdir(args)
    raw, _ = load_csv(cfg.dataset)
    train_ds, test_ds = split_standardize(raw, cfg.fraction, cfg.seed, 0)
    record, extras = run_single(cfg, train_ds, test_ds, split_index=0)
    write_manifest(os.path.join(out, "manifest.txt"), cfg)
    write_split_report(os.path.join(out, "metrics.txt"),
                       os.path.basename(cfg.dataset), [record])
    if "z" in extras:
        _write_z(os.path.join(out, "inducing.txt"), extras["z"])
    if "hypers" in extras:
        _write_hypers(os.path.join(out, "hypers.txt"), extras["hypers"])
    if "trace" in extras:
        trace = extras["trace"]
        write_trace(os.path.join(out, "trace.txt"), trace)
        write_summary(os.path.join(out, "summary.txt"), summarize(trace))
    if "model" in extras:
        write_training_log(os.path.join(out, "training_log.txt"), extras["model"])
    print(f"fit: {cfg.method} rmse={record.rmse:.4f} nlpd={record.nlpd:.4f} "
          f"(outputs in {out})")
    return 0


def cmd_bench(args) -> int:
    cfg = _base_config(args)
    cfg = replace(cfg, dataset=args.data or cfg.dataset,
                  method=args.method or cfg.method,
                  m_inducing=args.m or cfg.m_inducing,
                  n_splits=args.splits or cfg.n_splits)
    if cfg.dataset is None:
        print("bench: no dataset given (use --data)", file=sys.stderr)
        return 2
    if not os.path.exists(cfg.dataset):
        print(f"bench: dataset not found: {cfg.dataset}", file=sys.stderr)
        return 2
    out = _outdir(args)
    result = run_experiment(cfg)
    write_manifest(os.path.join(out, "manifest.txt"), cfg)
    write_split_report(os.path.join(out, "splits.txt"), result.dataset,
                       result.records)
    write_bench_report(os.path.join(out, "bench.txt"), [result])
    sem = f" ({result.rmse_sem:.3f})" if result.rmse_sem is not None else ""
    print(f"bench: {result.method} on {result.dataset}: "
          f"rmse={result.rmse_mean:.4f}{sem} nlpd={result.nlpd_mean:.4f} "
          f"[{result.n_completed}/{cfg.n_splits} splits]")
    return 0


def cmd_surface(args) -> int:
    cfg = _base_config(args)
    data_path = args.data or cfg.dataset
    if data_path is None:
        print("surface: no dataset given (use --data)", file=sys.stderr)
        return 2
    out = _outdir(args)
    raw, _ = load_csv(data_path)
    train_ds, _ = split_standardize(raw, cfg.fraction, cfg.seed, 0)
    fixed = Hypers.default(train_ds.input_dim)
    if args.fixed_noise is not None:
        fixed = Hypers(fixed.lengthscales, fixed.signal_std, args.fixed_noise)
    lo_a, hi_a = args.range_a
    lo_b, hi_b = args.range_b
    spec = GridSpec(args.param_a, args.param_b, (lo_a, hi_a), (lo_b, hi_b),
                    resolution=args.resolution)
    surface = lml_surface(train_ds, spec, fixed)
    write_manifest(os.path.join(out, "manifest.txt"), cfg)
    path = os.path.join(out, "surface.txt")
    write_surface(path, surface)
    print(f"surface: wrote {surface.neg_lml.shape} grid to {path}")
    return 0


def cmd_diagnose(args) -> int:
    if not os.path.exists(args.trace):
        print(f"diagnose: trace file not found: {args.trace}", file=sys.stderr)
        return 2
    trace = read_trace(args.trace)
    summary = summarize(trace)
    out = _outdir(args)
    path = os.path.join(out, "summary.txt")
    write_summary(path, summary)
    with open(path, "r", encoding="utf-8") as fh:
        print(fh.read(), end="")
    return 0


def cmd_synth1d(args) -> int:
    cfg = _base_config(args)
    cfg = replace(cfg, m_inducing=args.m or 25)
    out = _outdir(args)
    train_ds, test_ds = synth1d_generate(cfg.seed)
    records = []
    traces = {}
    for method in ("sgpr-ml2", "sgpr-hmc", "joint-hmc"):
        mcfg = replace(cfg, method=method)
        record, extras = run_single(mcfg, train_ds, test_ds, split_index=0)
        records.append(record)
        if "trace" in extras:
            traces[method] = extras["trace"]
    write_manifest(os.path.join(out, "manifest.txt"), cfg)
    write_split_report(os.path.join(out, "metrics.txt"), "synth1d", records)
    if "sgpr-hmc" in traces:
        write_trace(os.path.join(out, "trace.txt"), traces["sgpr-hmc"])
    for r in records:
        print(f"synth1d: {r.method:10s} rmse={r.rmse:.4f} nlpd={r.nlpd:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgphmc",
        description="Sparse GP regression with sampled hyperparameters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--out", default=None, help="output directory")

    p_fit = sub.add_parser("fit", help="fit one method on one split")
    common(p_fit)
    p_fit.add_argument("--data", default=None, help="CSV path (last column target)")
    p_fit.add_argument("--method", choices=METHODS, default=None)
    p_fit.add_argument("--m", type=int, default=None, help="inducing point count")
    p_fit.set_defaults(func=cmd_fit)

    p_bench = sub.add_parser("bench", help="multi-split benchmark")
    common(p_bench)
    p_bench.add_argument("--data", default=None)
    p_bench.add_argument("--method", choices=METHODS, default=None)
    p_bench.add_argument("--m", type=int, default=None)
    p_bench.add_argument("--splits", type=int, default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_surface = sub.add_parser("surface", help="negative-LML grid")
    common(p_surface)
    p_surface.add_argument("--data", default=None)
    p_surface.add_argument("--param-a", dest="param_a", default="sig_f2")
    p_surface.add_argument("--param-b", dest="param_b", default="ls[0]")
    p_surface.add_argument("--range-a", dest="range_a", type=float, nargs=2,
                           default=(0.01, 100.0))
    p_surface.add_argument("--range-b", dest="range_b", type=float, nargs=2,
                           default=(0.01, 10.0))
    p_surface.add_argument("--resolution", type=int, default=30)
    p_surface.add_argument("--fixed-noise", dest="fixed_noise", type=float,
                           default=None)
    p_surface.set_defaults(func=cmd_surface)

    p_diag = sub.add_parser("diagnose", help="summarize a saved trace")
    common(p_diag)
    p_diag.add_argument("--trace", required=True)
    p_diag.set_defaults(func=cmd_diagnose)

    p_syn = sub.add_parser("synth1d", help="1-D three-method comparison")
    common(p_syn)
    p_syn.add_argument("--m", type=int, default=None)
    p_syn.set_defaults(func=cmd_synth1d)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
