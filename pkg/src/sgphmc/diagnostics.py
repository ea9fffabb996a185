"""MCMC chain-quality metrics: autocorrelation, effective sample size
(plain, rank-normalized bulk, and tail), highest-density intervals, Monte
Carlo standard errors, and per-parameter chain summaries.

The effective sample size follows

    ess = M N / (1 + 2 sum_t rho_t)

with the sum truncated where Geyer's paired autocorrelations first go
negative; bulk ESS applies the same estimator to rank-normalized draws
(Vehtari et al., 2021) and tail ESS to the 3%/97% quantile indicator
chains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .hmc import Trace

__all__ = [
    "autocorr",
    "ess",
    "ess_bulk",
    "ess_tail",
    "hdi",
    "mcse_mean",
    "mcse_sd",
    "ChainSummary",
    "summarize",
    "write_summary",
]


def _as_chain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 4:
        raise ValueError("chain too short")
    if np.ptp(x) == 0.0:
        raise ValueError("autocorrelation of a constant chain is undefined")
    return x


def autocorr(chain, max_lag: int | None = None) -> np.ndarray:
    """Biased normalized autocovariance estimates rho_0..rho_max_lag
    (rho_0 = 1), computed via FFT."""
    x = _as_chain(chain)
    n = x.size
    if max_lag is None:
        max_lag = n - 2
    if max_lag >= n:
        raise ValueError("max_lag must be smaller than the chain length")
    xc = x - x.mean()
    size = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1].real / n
    return acov / acov[0]


def _tau(rho: np.ndarray, n: int) -> float:
    """Integrated autocorrelation time with Geyer initial-positive-sequence
    truncation, floored as in Stan so anti-correlated chains stay valid."""
    # pair sums P_k = rho_{2k} + rho_{2k+1}
    n_pairs = rho.size // 2
    total = 0.0
    for k in range(n_pairs):
        p = rho[2 * k] + rho[2 * k + 1]
        if p <= 0.0:
            break
        total += p
    tau = -1.0 + 2.0 * total
    return max(tau, 1.0 / np.log10(max(n, 10)))


def ess(chain) -> float:
    """Effective sample size of a single chain (may exceed N for
    anti-correlated chains)."""
    x = _as_chain(chain)
    rho = autocorr(x)
    return float(x.size / _tau(rho, x.size))


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    """Average ranks mapped through the normal quantile function."""
    from scipy.stats import rankdata

    r = rankdata(x, method="average")
    return ndtri((r - 0.375) / (x.size + 0.25))


def ess_bulk(chain) -> float:
    """ESS of the rank-normalized draws; invariant under strictly
    monotone transforms of the chain."""
    x = _as_chain(chain)
    return ess(_rank_normalize(x))


def ess_tail(chain, lower: float = 0.03, upper: float = 0.97) -> float:
    """Minimum ESS of the lower/upper quantile indicator chains."""
    x = _as_chain(chain)
    out = []
    for q in (lower, upper):
        ind = (x <= np.quantile(x, q)).astype(float)
        if np.ptp(ind) == 0.0:
            raise ValueError(f"quantile {q} indicator chain is constant")
        out.append(ess(ind))
    return float(min(out))


def hdi(chain, mass: float = 0.94) -> tuple[float, float]:
    """Narrowest contiguous interval containing ceil(mass * N) draws;
    ties broken by the earliest start index."""
    x = np.sort(np.asarray(chain, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise ValueError("need at least two draws for an interval")
    if not 0.0 < mass <= 1.0:
        raise ValueError("mass must lie in (0, 1]")
    n_incl = int(np.ceil(mass * n))
    if n_incl >= n:
        return float(x[0]), float(x[-1])
    widths = x[n_incl - 1:] - x[: n - n_incl + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + n_incl - 1])


def mcse_mean(chain) -> float:
    x = _as_chain(chain)
    return float(np.std(x, ddof=1) / np.sqrt(ess(x)))


def mcse_sd(chain) -> float:
    """Delta-method standard error of the sample sd:
    Var(s^2) ~ (m4 - s^4)/ess, mapped through d(sqrt)/ds^2 = 1/(2 s)."""
    x = _as_chain(chain)
    s = np.std(x, ddof=1)
    m4 = np.mean((x - x.mean()) ** 4)
    var_s2 = max(m4 - s**4, 0.0) / ess(x)
    return float(np.sqrt(var_s2) / (2.0 * s))


@dataclass
class ChainSummary:
    """Per-parameter posterior summary rows (constrained scale)."""

    names: list[str]
    mean: np.ndarray
    sd: np.ndarray
    hdi_lo: np.ndarray
    hdi_hi: np.ndarray
    mcse_mean: np.ndarray
    mcse_sd: np.ndarray
    ess_bulk: np.ndarray
    ess_tail: np.ndarray

    def row(self, name: str):
        i = self.names.index(name)
        return {
            "mean": self.mean[i], "sd": self.sd[i],
            "hdi_3%": self.hdi_lo[i], "hdi_97%": self.hdi_hi[i],
            "mcse_mean": self.mcse_mean[i], "mcse_sd": self.mcse_sd[i],
            "ess_bulk": self.ess_bulk[i], "ess_tail": self.ess_tail[i],
        }


def summarize(trace: Trace, hdi_mass: float = 0.94) -> ChainSummary:
    """Appendix-table style summary of a trace on the constrained scale.

    ESS values are capped at the number of draws for reporting.  A
    single-draw trace yields means with the spread columns undefined
    (NaN, signalled by a warning).
    """
    cons = trace.constrained()
    j, d = cons.shape
    names = list(trace.param_names)
    cols = {k: np.full(d, np.nan) for k in
            ("mean", "sd", "lo", "hi", "mm", "ms", "eb", "et")}
    cols["mean"] = cons.mean(axis=0)
    if j < 2:
        warnings.warn("single-draw trace: spread statistics are undefined")
    else:
        for i in range(d):
            x = cons[:, i]
            cols["sd"][i] = np.std(x, ddof=1)
            cols["lo"][i], cols["hi"][i] = hdi(x, hdi_mass)
            try:
                cols["eb"][i] = min(ess_bulk(x), j)
                cols["et"][i] = min(ess_tail(x), j)
                cols["mm"][i] = mcse_mean(x)
                cols["ms"][i] = mcse_sd(x)
            except ValueError:
                warnings.warn(f"parameter {names[i]}: degenerate chain, "
                              "ess/mcse undefined")
    return ChainSummary(
        names=names, mean=cols["mean"], sd=cols["sd"],
        hdi_lo=cols["lo"], hdi_hi=cols["hi"],
        mcse_mean=cols["mm"], mcse_sd=cols["ms"],
        ess_bulk=cols["eb"], ess_tail=cols["et"],
    )


def write_summary(path, summary: ChainSummary) -> None:
    """Tab-delimited summary table; mcse_sd uses the delta-method
    estimator (noted in the header)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# mcse_sd: delta-method estimate sqrt((m4 - sd^4)/ess)/(2 sd)\n")
        fh.write("hyper\tmean\tsd\thdi_3%\thdi_97%\tmcse_mean\tmcse_sd"
                 "\tess_bulk\tess_tail\n")
        for i, name in enumerate(summary.names):
            fh.write(
                f"{name}\t{summary.mean[i]:.6g}\t{summary.sd[i]:.6g}"
                f"\t{summary.hdi_lo[i]:.6g}\t{summary.hdi_hi[i]:.6g}"
                f"\t{summary.mcse_mean[i]:.6g}\t{summary.mcse_sd[i]:.6g}"
                f"\t{summary.ess_bulk[i]:.6g}\t{summary.ess_tail[i]:.6g}\n"
            )
