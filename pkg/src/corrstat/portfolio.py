"""Minimum-variance portfolio machinery and the q-ratio experiment.

Weights minimize w' C w under sum(w) = 1 (shorts allowed), solved from
C x = 1 and normalized, never through an explicit inverse.  The q ratio
sigma_R / sigma_E compares realized risk (previous window's weights held
over the next window) against the in-sample optimum; Monte Carlo bands
of q under a stationary truth mark the non-optimality region, and
samples above mean + k sd of that band signal effects beyond weight
staleness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import synthgen
from .dataio import ReturnPanel
from .errors import (
    IllPosed,
    InsufficientData,
    InvalidParameter,
    NumericsError,
    ZeroVariance,
)
from .parallel import parallel_map
from .rngutil import rng_for

_CONDITION_LIMIT = 1e12
DEFAULT_BAND_SIGMAS = 5.0


@dataclass(frozen=True)
class CovarianceMatrix:
    """Population covariance over one column range; window None = abstract."""

    tickers: tuple[str, ...]
    entries: np.ndarray
    window: tuple[int, int] | None = None

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        n = len(self.tickers)
        if entries.shape != (n, n):
            raise InvalidParameter("entries must be N x N matching tickers")

    @property
    def n_series(self) -> int:
        return self.entries.shape[0]

    @property
    def window_len(self) -> int | None:
        return None if self.window is None else self.window[1] - self.window[0]


@dataclass(frozen=True)
class WeightVector:
    """Holdings fractions under the budget constraint sum(w) = 1."""

    tickers: tuple[str, ...]
    w: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or w.size != len(self.tickers):
            raise InvalidParameter("weights must be one per ticker")
        budget = float(w.sum())
        if abs(budget - 1.0) > 1e-12 * max(1.0, float(np.abs(w).sum())):
            raise InvalidParameter(f"weights sum to {budget!r}, not 1")


@dataclass
class QExperiment:
    """One chained sample: weights from window 1 held over window 2."""

    sample: int
    t1_range: tuple[int, int]
    t2_range: tuple[int, int]
    sigma_e: float
    sigma_r: float
    q: float
    sigma_t: float | None = None
    band: tuple[float, float, float] | None = None  # (mc mean, mc sd, k)


class MCBand(NamedTuple):
    mean: float
    sd: float


def covariance_matrix(panel: ReturnPanel, window: tuple[int, int] | None = None) -> CovarianceMatrix:
    """Population covariance of the rows over a column range."""
    lo, hi = (0, panel.n_steps) if window is None else (int(window[0]), int(window[1]))
    if not (0 <= lo < hi <= panel.n_steps):
        raise InvalidParameter(f"window {(lo, hi)} outside panel range")
    if hi - lo < 2:
        raise InsufficientData("covariance needs at least 2 observations")
    block = panel.returns[:, lo:hi]
    mean = block.mean(axis=1, keepdims=True)
    centered = block - mean
    var = (centered * centered).mean(axis=1)
    floor = 1e-12 * np.maximum(1.0, np.abs(mean[:, 0]))
    bad = np.nonzero(np.sqrt(var) <= floor)[0]
    if bad.size:
        raise ZeroVariance(panel.tickers[bad[0]], window=(lo, hi))
    c = (centered @ centered.T) / (hi - lo)
    c = 0.5 * (c + c.T)
    return CovarianceMatrix(panel.tickers, c, (lo, hi))


def min_variance_weights(cov: CovarianceMatrix, ridge: float = 0.0) -> WeightVector:
    """Budget-constrained minimum-variance weights.

    Solves C x = 1 and normalizes, which is the closed form
    w_i = sum_j inv(C)_ij / sum_jk inv(C)_jk without forming the inverse.
    A positive ridge adds ridge * mean(diag) to the diagonal first; it is
    never applied silently, callers must ask for it.
    """
    n = cov.n_series
    t_len = cov.window_len
    if t_len is not None and t_len <= n:
        raise IllPosed(n, t_len)
    if ridge < 0.0:
        raise InvalidParameter(f"ridge must be >= 0, got {ridge!r}")
    c = cov.entries
    if ridge > 0.0:
        c = c + ridge * float(np.trace(c)) / n * np.eye(n)
    synthgen.cholesky(c)  # PD gate with pivot report
    cond = float(np.linalg.cond(c))
    if cond > _CONDITION_LIMIT:
        raise NumericsError(
            f"covariance condition number {cond:.3e} exceeds {_CONDITION_LIMIT:.0e}; "
            "pass a ridge to regularize explicitly",
            error_estimate=cond,
        )
    x = np.linalg.solve(c, np.ones(n))
    return WeightVector(cov.tickers, x / x.sum())


def portfolio_variance(cov: CovarianceMatrix, weights: WeightVector) -> float:
    """w' C w, clamped against negative roundoff."""
    c = getattr(cov, "entries", cov)
    w = getattr(weights, "w", weights)
    w = np.asarray(w, dtype=np.float64)
    if w.size != np.asarray(c).shape[0]:
        raise InvalidParameter("weights and covariance dimensions differ")
    return max(0.0, float(w @ c @ w))


def portfolio_pnl(weights: WeightVector, panel: ReturnPanel,
                  window: tuple[int, int] | None = None) -> np.ndarray:
    """Portfolio value changes sum_i w_i r_it over the range."""
    lo, hi = (0, panel.n_steps) if window is None else (int(window[0]), int(window[1]))
    if not (0 <= lo < hi <= panel.n_steps):
        raise InvalidParameter(f"window {(lo, hi)} outside panel range")
    w = weights.w if isinstance(weights, WeightVector) else np.asarray(weights, float)
    if w.size != panel.n_series:
        raise InvalidParameter("one weight per panel row required")
    return w @ panel.returns[:, lo:hi]


def select_stocks(panel: ReturnPanel, n_stocks: int, select_seed: int) -> ReturnPanel:
    """Seeded random subset of n_stocks rows, original order kept."""
    n = panel.n_series
    if not (1 <= n_stocks <= n):
        raise InvalidParameter(f"n_stocks must lie in [1, {n}], got {n_stocks}")
    if n_stocks == n:
        return panel
    idx = rng_for(select_seed, "stock-subset").choice(n, size=n_stocks, replace=False)
    return panel.select(sorted(int(i) for i in idx))


def _chained_ranges(t_total: int, t1: int, t2: int):
    """Realized blocks [k t2, (k+1) t2); estimation is the t1 days before.

    The realized grid depends only on t2, so experiments with different
    estimation lengths stay sample-aligned; with t1 = t2 this is exactly
    the chained protocol (window 2 of sample n is window 1 of n+1).
    """
    first = max(1, -(-t1 // t2))  # ceil(t1 / t2)
    ranges = []
    k = first
    while (k + 1) * t2 <= t_total:
        ranges.append(((k * t2 - t1, k * t2), (k * t2, (k + 1) * t2)))
        k += 1
    return ranges


def _independent_ranges(t_total: int, t1: int, t2: int):
    span = t1 + t2
    return [
        ((m * span, m * span + t1), (m * span + t1, (m + 1) * span))
        for m in range(t_total // span)
    ]


def q_series(panel: ReturnPanel, t1: int, t2: int, n_stocks: int | None = None,
             select_seed: int = 0, chained: bool = True,
             truth: CovarianceMatrix | None = None) -> list[QExperiment]:
    """q = sigma_R / sigma_E over successive estimation/realized windows.

    With a truth covariance supplied (synthetic runs), each sample also
    carries sigma_T, the held weights' risk under the true covariance.
    """
    if t1 < 2 or t2 < 2:
        raise InvalidParameter("t1 and t2 must be >= 2")
    if n_stocks is not None:
        panel = select_stocks(panel, n_stocks, select_seed)
    ranges = (_chained_ranges if chained else _independent_ranges)(
        panel.n_steps, t1, t2
    )
    if not ranges:
        raise InsufficientData(
            f"panel of {panel.n_steps} steps has no full (t1={t1}, t2={t2}) sample"
        )
    out = []
    for sample, (est_range, real_range) in enumerate(ranges, start=1):
        cov_est = covariance_matrix(panel, est_range)
        weights = min_variance_weights(cov_est)
        cov_real = covariance_matrix(panel, real_range)
        sigma_e = math.sqrt(portfolio_variance(cov_est, weights))
        sigma_r = math.sqrt(portfolio_variance(cov_real, weights))
        sigma_t = None
        if truth is not None:
            sigma_t = math.sqrt(portfolio_variance(truth, weights))
        out.append(QExperiment(
            sample=sample,
            t1_range=est_range,
            t2_range=real_range,
            sigma_e=sigma_e,
            sigma_r=sigma_r,
            q=sigma_r / sigma_e,
            sigma_t=sigma_t,
        ))
    return out


def mc_band(n_series: int, t1: int, t2: int, replicas: int,
            truth: synthgen.TrueCorrelation, seed: int,
            volatilities=None, threads=1) -> MCBand:
    """MC mean and sd of q on stationary Gaussian panels from the truth.

    Each replica draws one independent N x (t1 + t2) panel on its own
    substream and contributes one q; aggregation is in replica order, so
    the result is identical for any thread count.
    """
    if replicas < 30:
        raise InvalidParameter(f"need >= 30 replicas for a band, got {replicas}")
    if truth.n_series != n_series:
        raise InvalidParameter("truth dimension does not match n_series")
    scale = None
    if volatilities is not None:
        scale = np.asarray(volatilities, dtype=np.float64)
        if scale.shape != (n_series,) or np.any(scale <= 0):
            raise InvalidParameter("volatilities must be N positive reals")
    spec = synthgen.GeneratorSpec(
        family=synthgen.FAMILY_GAUSSIAN,
        n_series=n_series,
        n_steps=t1 + t2,
        seed=seed,
        correlation=truth,
    )

    def one_replica(replica: int) -> float:
        synth = synthgen.sample_gaussian_panel(spec, replica=replica)
        if scale is not None:
            synth = ReturnPanel(
                synth.tickers, synth.times, synth.returns * scale[:, None]
            )
        sample = q_series(synth, t1, t2, chained=False)
        return sample[0].q

    qs = np.asarray(parallel_map(one_replica, range(replicas), threads))
    return MCBand(float(qs.mean()), float(qs.std(ddof=1)))


def flag_band_violations(experiments, band: MCBand,
                         n_sigma: float = DEFAULT_BAND_SIGMAS) -> list[bool]:
    """True where q exceeds band mean + n_sigma * band sd."""
    if n_sigma <= 0:
        raise InvalidParameter(f"n_sigma must be > 0, got {n_sigma!r}")
    limit = band.mean + n_sigma * band.sd
    return [exp.q > limit for exp in experiments]
