"""Seeded stationary panel generators with a prescribed correlation matrix.

Gaussian panels come from a Cholesky factor of the target; Student-t
panels from the Gaussian scale mixture

    x_t = z_t * sqrt(nu / s_t),   z_t ~ N(0, C),  s_t ~ chi^2_nu,

one scale draw per time step, which keeps the linear correlation matrix
exactly C for nu > 2 while giving each margin a density tail ~ |x|^-(nu+1).
All draws run on counter-based substreams (see rngutil), so replicas are
independent and reproducible regardless of execution order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corrdist import corr_matrix
from .dataio import ReturnPanel
from .errors import InvalidParameter, NotPositiveDefinite
from .rngutil import rng_for

_MIN_EIGENVALUE = 1e-10
_REPAIR_FLOOR = 1e-8

FAMILY_GAUSSIAN = "gaussian"
FAMILY_STUDENT_T = "student-t"


@dataclass(frozen=True)
class TrueCorrelation:
    """Population correlation matrix a generator treats as exact truth."""

    entries: np.ndarray
    source: str
    repaired: bool = False

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        n = entries.shape[0]
        if entries.ndim != 2 or entries.shape != (n, n):
            raise InvalidParameter("correlation entries must be square")
        if np.abs(entries - entries.T).max() > 1e-12:
            raise InvalidParameter("correlation entries must be symmetric")
        if np.abs(np.diag(entries) - 1.0).max() > 1e-10:
            raise InvalidParameter("correlation entries need a unit diagonal")
        smallest = float(np.linalg.eigvalsh(entries)[0])
        if smallest <= _MIN_EIGENVALUE:
            raise NotPositiveDefinite(
                f"true correlation must be positive definite, "
                f"smallest eigenvalue {smallest:.3e}"
            )

    @property
    def n_series(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class GeneratorSpec:
    """Family, size, seed and target correlation of one synthetic panel."""

    family: str
    n_series: int
    n_steps: int
    seed: int
    correlation: TrueCorrelation
    nu: float | None = None

    def __post_init__(self):
        if self.family not in (FAMILY_GAUSSIAN, FAMILY_STUDENT_T):
            raise InvalidParameter(f"unknown family {self.family!r}")
        if self.family == FAMILY_STUDENT_T:
            if self.nu is None or not self.nu > 2.0:
                raise InvalidParameter(
                    "student-t family needs nu > 2 for a finite-variance target"
                )
        if self.n_steps < 1:
            raise InvalidParameter("n_steps must be >= 1")
        if self.correlation.n_series != self.n_series:
            raise InvalidParameter(
                f"correlation is {self.correlation.n_series}x"
                f"{self.correlation.n_series}, spec says N={self.n_series}"
            )


def _as_matrix(c) -> np.ndarray:
    entries = getattr(c, "entries", c)
    return np.asarray(entries, dtype=np.float64)


def _failing_pivot(c: np.ndarray) -> int:
    """Order of the smallest non-PD leading minor, found by bisection."""
    n = c.shape[0]
    lo, hi = 1, n  # invariant: leading minor of order hi fails
    while lo < hi:
        mid = (lo + hi) // 2
        try:
            np.linalg.cholesky(c[:mid, :mid])
            lo = mid + 1
        except np.linalg.LinAlgError:
            hi = mid
    return lo - 1  # zero-based pivot index


def cholesky(c) -> np.ndarray:
    """Lower-triangular L with L @ L.T equal to the input matrix."""
    mat = _as_matrix(c)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidParameter("cholesky needs a square matrix")
    scale = max(1.0, float(np.abs(mat).max()))
    if np.abs(mat - mat.T).max() > 1e-12 * scale:
        raise NotPositiveDefinite("matrix is not symmetric", pivot=None)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            "matrix is not positive definite", pivot=_failing_pivot(mat)
        ) from None


def _synthetic_panel(returns: np.ndarray) -> ReturnPanel:
    n, t = returns.shape
    width = len(str(n - 1))
    tickers = tuple(f"S{i:0{width}d}" for i in range(n))
    times = tuple(str(k) for k in range(t))
    return ReturnPanel(tickers, times, returns)


def sample_gaussian_panel(spec: GeneratorSpec, replica: int = 0) -> ReturnPanel:
    """Panel with i.i.d. N(0, C) columns, deterministic per (seed, replica)."""
    if spec.family != FAMILY_GAUSSIAN:
        raise InvalidParameter(f"spec family is {spec.family!r}, not gaussian")
    lower = cholesky(spec.correlation)
    rng = rng_for(spec.seed, "gaussian-panel", replica)
    z = rng.standard_normal((spec.n_series, spec.n_steps))
    return _synthetic_panel(lower @ z)


def sample_student_t_panel(spec: GeneratorSpec, replica: int = 0) -> ReturnPanel:
    """Panel with i.i.d. multivariate-t columns sharing correlation C."""
    if spec.family != FAMILY_STUDENT_T:
        raise InvalidParameter(f"spec family is {spec.family!r}, not student-t")
    if spec.nu < 3.0:
        raise InvalidParameter(f"sampling needs nu >= 3, got {spec.nu!r}")
    lower = cholesky(spec.correlation)
    rng = rng_for(spec.seed, "student-t-panel", replica)
    z = lower @ rng.standard_normal((spec.n_series, spec.n_steps))
    s = rng.chisquare(spec.nu, size=spec.n_steps)
    return _synthetic_panel(z * np.sqrt(spec.nu / s)[None, :])


def sample_panel(spec: GeneratorSpec, replica: int = 0) -> ReturnPanel:
    """Dispatch on spec.family."""
    if spec.family == FAMILY_GAUSSIAN:
        return sample_gaussian_panel(spec, replica)
    return sample_student_t_panel(spec, replica)


def sample_estimate_as_truth(panel, window=None) -> TrueCorrelation:
    """Full-sample (or windowed) correlation estimate promoted to truth.

    A rank-deficient or indefinite estimate (N > T windows) is repaired
    by clipping eigenvalues at 1e-8 and renormalizing the diagonal; the
    repair is recorded on the result.
    """
    estimate = corr_matrix(panel, window).entries
    smallest = float(np.linalg.eigvalsh(estimate)[0])
    if smallest > _MIN_EIGENVALUE:
        return TrueCorrelation(estimate, source="sample-estimate")
    eigvals, eigvecs = np.linalg.eigh(estimate)
    clipped = (eigvecs * np.maximum(eigvals, _REPAIR_FLOOR)) @ eigvecs.T
    d = np.sqrt(np.diag(clipped))
    repaired = clipped / np.outer(d, d)
    repaired = 0.5 * (repaired + repaired.T)
    np.fill_diagonal(repaired, 1.0)
    return TrueCorrelation(repaired, source="sample-estimate", repaired=True)


# --- correlation model builders used by fixtures and the command line ---


def identity_correlation(n: int) -> TrueCorrelation:
    return TrueCorrelation(np.eye(n), source="identity")


def equicorr_correlation(n: int, rho: float) -> TrueCorrelation:
    """All off-diagonals equal to rho; PD for rho in (-1/(N-1), 1)."""
    if n < 2:
        raise InvalidParameter("equicorrelation needs N >= 2")
    if not (-1.0 / (n - 1) < rho < 1.0):
        raise InvalidParameter(
            f"equicorrelation with N={n} needs rho in (-1/(N-1), 1), got {rho!r}"
        )
    c = np.full((n, n), float(rho))
    np.fill_diagonal(c, 1.0)
    return TrueCorrelation(c, source=f"model:equicorr({n},{rho})")


def one_factor_correlation(n: int, seed: int, loading_range=(0.3, 0.9)) -> TrueCorrelation:
    """C = beta beta^T + diag(1 - beta^2) with seeded uniform loadings."""
    lo, hi = loading_range
    if not (0.0 <= lo <= hi < 1.0):
        raise InvalidParameter("loadings must satisfy 0 <= lo <= hi < 1")
    beta = rng_for(seed, "one-factor-loadings").uniform(lo, hi, size=n)
    c = np.outer(beta, beta)
    np.fill_diagonal(c, 1.0)
    return TrueCorrelation(c, source=f"model:one-factor({n},seed={seed})")
