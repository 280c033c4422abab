"""Spectral diagnostics of correlation matrices.

The largest eigenvalue tracks the market mode, the next few carry
sector structure, and the inverse participation ratio of the market
eigenvector measures how evenly stocks load on it.  Window-to-window
relative changes in these three quantities, taken together, separate
market-wide shocks from sector reshuffling.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataio import ReturnPanel
from .errors import (
    DegenerateComponent,
    InvalidParameter,
    NotNormalized,
    NotSymmetric,
    NumericsError,
)

_SYMMETRY_TOL = 1e-12
_ORTHO_TOL = 1e-10
_RECON_TOL = 1e-8
_GAP_SCALE = 1e-8
_COMPONENT_FLOOR = 1e-12
DEFAULT_SECTOR_COUNT = 3


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues ascending; eigenvectors[:, k] belongs to eigenvalues[k]."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        vec = np.ascontiguousarray(self.eigenvectors, dtype=np.float64)
        lam.setflags(write=False)
        vec.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vec)
        n = lam.size
        if vec.shape != (n, n):
            raise InvalidParameter("eigenvector matrix must be N x N")
        if np.any(np.diff(lam) < 0):
            raise InvalidParameter("eigenvalues must be ascending")
        gram_gap = float(np.abs(vec.T @ vec - np.eye(n)).max())
        if gram_gap > _ORTHO_TOL:
            raise NumericsError(
                f"eigenvectors not orthonormal, gram gap {gram_gap:.3e}",
                error_estimate=gram_gap,
            )

    @property
    def n_series(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class SpectralSnapshot:
    """Market eigenvalue, sector sum, and market-mode IPR for one window."""

    window: tuple[int, int] | None
    lambda_market: float
    lambda_sector: float
    ipr_market: float
    ipr_unstable: bool


@dataclass(frozen=True)
class SpectralDelta:
    """Relative changes (x2 - x1) / x1; d_ipr is None when unstable."""

    d_market: float
    d_sector: float
    d_ipr: float | None


class PCAComponents(NamedTuple):
    indices: tuple[int, ...]
    series: np.ndarray  # one row per retained component


class MarketResidual(NamedTuple):
    total: float
    per_stock: np.ndarray


def eig_sym(matrix) -> EigenSystem:
    """Full eigensystem of a symmetric matrix, ascending order.

    Each eigenvector is flipped so its largest-magnitude component is
    positive, removing the sign ambiguity across platforms.
    """
    c = np.asarray(getattr(matrix, "entries", matrix), dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidParameter("matrix must be square")
    gap = float(np.abs(c - c.T).max())
    if gap > _SYMMETRY_TOL:
        raise NotSymmetric(f"asymmetry {gap:.3e} exceeds {_SYMMETRY_TOL:.0e}")
    lam, vec = np.linalg.eigh(0.5 * (c + c.T))
    for k in range(lam.size):
        lead = np.argmax(np.abs(vec[:, k]))
        if vec[lead, k] < 0:
            vec[:, k] = -vec[:, k]
    recon_gap = float(np.abs((vec * lam) @ vec.T - c).max())
    if recon_gap > _RECON_TOL * max(1.0, float(np.abs(c).max())):
        raise NumericsError(
            f"eigendecomposition reconstruction gap {recon_gap:.3e}",
            error_estimate=recon_gap,
        )
    return EigenSystem(lam, vec)


def ipr(vector) -> float:
    """Inverse participation ratio sum_i v_i^4 of a unit vector."""
    v = np.asarray(vector, dtype=np.float64)
    norm_gap = abs(float(v @ v) - 1.0)
    if norm_gap > _ORTHO_TOL:
        raise NotNormalized(f"vector norm off by {norm_gap:.3e}")
    return float(np.sum(v ** 4))


def spectral_snapshot(corr, sectors: int = DEFAULT_SECTOR_COUNT,
                      window: tuple[int, int] | None = None) -> SpectralSnapshot:
    """Market / sector / IPR summary of one correlation matrix.

    The market eigenvalue is the largest; the sector sum covers the next
    ``sectors`` eigenvalues.  When the top of the spectrum is degenerate
    (gap below 1e-8 N) the market eigenvector is arbitrary within its
    eigenspace, so the IPR is flagged unstable.
    """
    eig = eig_sym(corr)
    n = eig.n_series
    if sectors < 1:
        raise InvalidParameter(f"sectors must be >= 1, got {sectors}")
    if n <= sectors + 1:
        raise InvalidParameter(
            f"need more than sectors + 1 = {sectors + 1} series, got {n}"
        )
    trace_gap = abs(float(eig.eigenvalues.sum()) - n)
    if trace_gap > 1e-10 * n:
        raise NumericsError(
            f"trace deviates from N by {trace_gap:.3e}; not a correlation matrix",
            error_estimate=trace_gap,
        )
    lam = eig.eigenvalues
    if window is None:
        window = getattr(corr, "window", None)
    gap = float(lam[-1] - lam[-2])
    return SpectralSnapshot(
        window=window,
        lambda_market=float(lam[-1]),
        lambda_sector=float(lam[-1 - sectors:-1].sum()),
        ipr_market=ipr(eig.eigenvectors[:, -1]),
        ipr_unstable=gap < _GAP_SCALE * n,
    )


def _relative(before: float, after: float) -> float:
    if before == 0.0:
        raise InvalidParameter("relative change undefined from a zero value")
    return (after - before) / before


def spectral_delta(first: SpectralSnapshot, second: SpectralSnapshot) -> SpectralDelta:
    """Window-to-window relative changes; IPR delta suppressed if unstable."""
    d_ipr = None
    if not (first.ipr_unstable or second.ipr_unstable):
        d_ipr = _relative(first.ipr_market, second.ipr_market)
    return SpectralDelta(
        d_market=_relative(first.lambda_market, second.lambda_market),
        d_sector=_relative(first.lambda_sector, second.lambda_sector),
        d_ipr=d_ipr,
    )


def co_occurrence_flag(delta: SpectralDelta,
                       thresholds: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> bool:
    """Market up while sector and IPR move down, beyond the thresholds.

    A suppressed IPR delta can never certify co-occurrence, so it yields
    False.
    """
    theta_m, theta_s, theta_i = thresholds
    if theta_m < 0:
        raise InvalidParameter("market threshold must be >= 0")
    if theta_s > 0 or theta_i > 0:
        raise InvalidParameter("sector and ipr thresholds must be <= 0")
    if delta.d_ipr is None:
        return False
    return (delta.d_market > theta_m
            and delta.d_sector < theta_s
            and delta.d_ipr < theta_i)


def pca_decompose(panel: ReturnPanel, eig: EigenSystem,
                  window: tuple[int, int] | None = None,
                  components=None) -> PCAComponents:
    """Eigenmode time series e_l(t) = (1/sqrt(lambda_l)) sum_i v_l^i r_i(t).

    The panel block must be the standardized window the eigensystem was
    computed from; then the retained components are mutually uncorrelated
    with unit variance.  Components at numerically zero eigenvalues carry
    no variance and are dropped by default; asking for one raises.
    """
    lo, hi = (0, panel.n_steps) if window is None else (int(window[0]), int(window[1]))
    if not (0 <= lo < hi <= panel.n_steps):
        raise InvalidParameter(f"window {(lo, hi)} outside panel range")
    if panel.n_series != eig.n_series:
        raise InvalidParameter("panel and eigensystem dimensions differ")
    lam = eig.eigenvalues
    if components is None:
        retained = [k for k in range(lam.size) if lam[k] > _COMPONENT_FLOOR]
    else:
        retained = [int(k) for k in components]
        for k in retained:
            if not (0 <= k < lam.size):
                raise InvalidParameter(f"component index {k} out of range")
            if lam[k] <= _COMPONENT_FLOOR:
                raise DegenerateComponent(
                    f"component {k} has eigenvalue {lam[k]:.3e}, below "
                    f"{_COMPONENT_FLOOR:.0e}"
                )
    block = panel.returns[:, lo:hi]
    series = np.empty((len(retained), hi - lo))
    for row, k in enumerate(retained):
        series[row] = (eig.eigenvectors[:, k] @ block) / np.sqrt(lam[k])
    return PCAComponents(tuple(retained), series)


def market_mode_residual(eig: EigenSystem) -> MarketResidual:
    """Variance fraction the market mode leaves unexplained.

    Total is 1 - lambda_N / N; per stock it is 1 - lambda_N (v_N^i)^2,
    the unexplained share of that stock's unit variance.
    """
    lam_market = float(eig.eigenvalues[-1])
    v_market = eig.eigenvectors[:, -1]
    n = eig.n_series
    per_stock = 1.0 - lam_market * v_market ** 2
    return MarketResidual(1.0 - lam_market / n, per_stock)
