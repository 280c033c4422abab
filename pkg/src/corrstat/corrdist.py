"""Pearson estimation and the exact sampling law of the measured coefficient.

For T joint observations of a bivariate Gaussian with true correlation
rho_bar, the measured coefficient rho is distributed as

    P(rho) = (T-2)/pi * (1-rho^2)^((T-4)/2) * (1-rho_bar^2)^((T-1)/2)
             * integral_0^inf dr (cosh r - rho*rho_bar)^-(T-1)

with mean and variance expanding to

    E[rho]   = rho_bar - rho_bar (1-rho_bar^2) / (2T) + ...
    Var[rho] = (1-rho_bar^2)^2 / T * (1 + 11 rho_bar^2 / (2T)) + ...

and a Gaussian approximation N(m_P, sigma_P), m_P = rho_bar,
sigma_P = (1-rho_bar^2)/sqrt(T).  Everything here is evaluated in
log-space so large T cannot underflow, and the r-integral uses a
validated Gauss-Legendre panel scheme (see _log_j).
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import (
    InsufficientData,
    InvalidParameter,
    NotPositiveDefinite,
    NotSymmetric,
    NumericsError,
    ZeroVariance,
)

RHO_BAR_LIMIT = 1.0 - 1e-12
MIN_T = 10

_QUAD_TOL = 1e-8
_MAX_REFINEMENTS = 4
_CHUNK = 2048


@dataclass(frozen=True)
class CorrParams:
    """True correlation and sample length behind a measured coefficient."""

    rho_bar: float
    n_obs: int

    def __post_init__(self):
        if not (abs(self.rho_bar) <= RHO_BAR_LIMIT):
            raise InvalidParameter(
                f"rho_bar must satisfy |rho_bar| <= {RHO_BAR_LIMIT!r}, got {self.rho_bar!r}"
            )
        if int(self.n_obs) != self.n_obs or self.n_obs < MIN_T:
            raise InvalidParameter(f"n_obs must be an integer >= {MIN_T}, got {self.n_obs!r}")


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Pearson matrix over one column range of a panel."""

    tickers: tuple[str, ...]
    entries: np.ndarray
    window: tuple[int, int]
    scope: str = "raw"

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

    def validate(self):
        """Check symmetry, unit diagonal, entry range and the PSD bound."""
        c = self.entries
        n = c.shape[0]
        if np.abs(c - c.T).max() > 1e-14:
            raise NotSymmetric("correlation matrix is not symmetric")
        if np.abs(np.diag(c) - 1.0).max() > 1e-12:
            raise InvalidParameter("correlation matrix diagonal deviates from 1")
        if np.abs(c).max() > 1.0:
            raise InvalidParameter("correlation entries outside [-1, 1]")
        smallest = float(np.linalg.eigvalsh(c)[0])
        if smallest < -1e-10 * n:
            raise NotPositiveDefinite(
                f"correlation matrix has eigenvalue {smallest:.3e}", pivot=None
            )
        return self


class CorrMoments(NamedTuple):
    mean: float
    variance: float
    m_p: float
    sigma_p: float


def pearson(x, y, assume_standardized: bool = False) -> float:
    """Pearson coefficient (1/T) sum x_t y_t on standardized series.

    Standardizes internally (population sd) unless told both inputs
    already are; the result is clamped into [-1, 1] against roundoff.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidParameter("pearson needs two 1-d series of equal length")
    t = x.size
    if t < 2:
        raise InsufficientData("pearson needs at least 2 observations")
    if not assume_standardized:
        x = _standardized_series(x, "x")
        y = _standardized_series(y, "y")
    r = float(x @ y) / t
    return min(1.0, max(-1.0, r))


def _standardized_series(v, name):
    mean = v.mean()
    sd = v.std()
    if sd <= 1e-12 * max(1.0, abs(mean)):
        raise ZeroVariance(name)
    return (v - mean) / sd


def corr_matrix(panel, window: tuple[int, int] | None = None) -> CorrelationMatrix:
    """Pairwise Pearson matrix on a column range (default: full sample).

    Rows are standardized over the range itself, so the result is the
    same whether the panel came in raw or standardized on another scope.
    """
    lo, hi = (0, panel.n_steps) if window is None else (int(window[0]), int(window[1]))
    if not (0 <= lo < hi <= panel.n_steps):
        raise InvalidParameter(f"window {(lo, hi)} outside panel range")
    if hi - lo < MIN_T:
        raise InsufficientData(f"window length {hi - lo} below minimum {MIN_T}")
    block = panel.returns[:, lo:hi]
    mean = block.mean(axis=1, keepdims=True)
    sd = block.std(axis=1, keepdims=True)
    floor = 1e-12 * np.maximum(1.0, np.abs(mean))
    bad = np.nonzero(sd <= floor)[0]
    if bad.size:
        raise ZeroVariance(panel.tickers[bad[0]], window=(lo, hi))
    z = (block - mean) / sd
    c = (z @ z.T) / (hi - lo)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    np.clip(c, -1.0, 1.0, out=c)
    return CorrelationMatrix(panel.tickers, c, (lo, hi), panel.scope)


# ---------------------------------------------------------------------------
# density

_gl_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order):
    if order not in _gl_cache:
        _gl_cache[order] = np.polynomial.legendre.leggauss(order)
    return _gl_cache[order]


def _panel_edges(width):
    """Panel boundaries on [0, 1] thinning geometrically toward u = 1."""
    edges = [0.0, 0.125, 0.25]
    gap = 0.5
    while gap > 0.5 * width:
        edges.append(1.0 - gap)
        gap *= 0.5
    edges.append(1.0 - gap)
    edges.append(1.0)
    return np.asarray(edges)


def _halved(edges):
    mid = 0.5 * (edges[1:] + edges[:-1])
    out = np.empty(edges.size + mid.size)
    out[0::2] = edges
    out[1::2] = mid
    return out


def _log_j(a, t, edges, order):
    """log of J(a) = integral_0^1 phi(u)^(t-1) du/u for each a in (-1, 1).

    Substituting u = exp(-r) into integral_0^inf (cosh r - a)^-(t-1) dr
    gives (1-a)^-(t-1) * J(a) with

        phi(u) = 1 / (1 + (1-u)^2 / (2u(1-a))),

    which rises to phi(1) = 1 over a scale sqrt(2(1-a)/(t-1)), so the
    edges must thin toward u = 1 at least down to that scale.
    """
    x, w = _gauss_legendre(order)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel() / u
    q = (1.0 - u)[None, :] ** 2 / (2.0 * u[None, :] * (1.0 - a)[:, None])
    z = -(t - 1.0) * np.log1p(q)
    zmax = z.max(axis=1, keepdims=True)
    j = np.exp(z - zmax) @ wu
    return zmax[:, 0] + np.log(j)


def _log_cosh_power_integral(a, t):
    """log of integral_0^inf (cosh r - a)^-(t-1) dr, vectorized over a."""
    a = np.asarray(a, dtype=np.float64)
    out = np.empty(a.shape)
    for lo in range(0, a.size, _CHUNK):
        seg = a[lo : lo + _CHUNK]
        out[lo : lo + _CHUNK] = _log_integral_chunk(seg, t)
    return out


def _log_integral_chunk(a, t):
    if a.size == 0:
        return np.empty(0)
    width = math.sqrt(2.0 * max(1.0 - float(a.max()), 1e-13) / (t - 1.0))
    edges = _panel_edges(min(width, 1.0))
    err = math.inf
    for _ in range(_MAX_REFINEMENTS):
        logj = _log_j(a, t, edges, 32)
        check = _log_j(a, t, edges, 16)
        err = float(np.abs(logj - check).max())
        if err <= _QUAD_TOL:
            return -(t - 1.0) * np.log1p(-a) + logj
        edges = _halved(edges)
    raise NumericsError(
        f"cosh-power quadrature stalled above tolerance {_QUAD_TOL:g}",
        error_estimate=err,
    )


def rho_logdensity(rho, params: CorrParams):
    """log rho_density; -inf at the endpoints rho = +-1 (where T > 4)."""
    rho_arr = np.asarray(rho, dtype=np.float64)
    flat = np.atleast_1d(rho_arr).ravel().astype(np.float64)
    if flat.size and float(np.abs(flat).max()) > 1.0:
        raise InvalidParameter("rho must lie in [-1, 1]")
    t = float(params.n_obs)
    rb = params.rho_bar
    out = np.full(flat.shape, -np.inf)
    interior = np.abs(flat) < 1.0
    ri = flat[interior]
    if ri.size:
        const = (
            math.log(t - 2.0)
            - math.log(math.pi)
            + 0.5 * (t - 1.0) * (math.log1p(-rb) + math.log1p(rb))
        )
        out[interior] = (
            const
            + 0.5 * (t - 4.0) * (np.log1p(-ri) + np.log1p(ri))
            + _log_cosh_power_integral(ri * rb, t)
        )
    if rho_arr.ndim == 0:
        return float(out[0])
    return out.reshape(rho_arr.shape)


def rho_density(rho, params: CorrParams):
    """Exact sampling density of the measured coefficient at rho."""
    out = rho_logdensity(rho, params)
    return math.exp(out) if np.ndim(out) == 0 else np.exp(out)


def rho_moments(params: CorrParams) -> CorrMoments:
    """Truncated-series mean/variance plus the Gaussian (m_P, sigma_P)."""
    rb = params.rho_bar
    t = float(params.n_obs)
    one = 1.0 - rb * rb
    mean = rb - rb * one / (2.0 * t)
    variance = one * one / t * (1.0 + 11.0 * rb * rb / (2.0 * t))
    return CorrMoments(mean, variance, rb, one / math.sqrt(t))


def gaussian_approx_density(rho, params: CorrParams):
    """N(m_P, sigma_P) density; support is all reals by construction."""
    m = rho_moments(params)
    rho_arr = np.asarray(rho, dtype=np.float64)
    z = (rho_arr - m.m_p) / m.sigma_p
    out = np.exp(-0.5 * z * z) / (m.sigma_p * math.sqrt(2.0 * math.pi))
    return float(out) if rho_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# CDF with a per-(rho_bar, T) cached table

_CDF_KEY_DECIMALS = 4
_MASS_TOL = 5e-6

_cdf_lock = threading.Lock()
_cdf_tables: dict[tuple[float, int], tuple[np.ndarray, np.ndarray, PchipInterpolator]] = {}


def _cdf_key(params: CorrParams):
    return (round(params.rho_bar, _CDF_KEY_DECIMALS), params.n_obs)


def _cdf_grid(rb, t):
    """Union of a uniform grid and a Fisher-transform-shaped refinement.

    The uniform part caps the node spacing at 1e-3; the refinement places
    nodes where the mass actually sits (the z = atanh(rho) image of the
    law is close to Gaussian with scale 1/sqrt(T-3), for any rho_bar), so
    the per-interval quadrature stays accurate even for rho_bar near +-1.
    """
    coarse = np.linspace(-1.0, 1.0, 2001)
    z0 = math.atanh(rb)
    s = 1.0 / math.sqrt(t - 3.0)
    dense = np.tanh(np.linspace(z0 - 8.0 * s, z0 + 8.0 * s, 801))
    grid = np.unique(np.concatenate([coarse, dense]))
    return grid[(grid >= -1.0) & (grid <= 1.0)]


def _build_cdf_table(key):
    rb, t = key
    # A rounded key can land on +-1.0 when the plug-in estimate was
    # clamped near an endpoint; pull it back inside the open interval.
    # Out there the table only needs to put its mass hard against the
    # endpoint, which any in-domain rho_bar this close achieves.
    rb = min(max(rb, -RHO_BAR_LIMIT), RHO_BAR_LIMIT)
    params = CorrParams(rb, t)
    grid = _cdf_grid(rb, t)
    x, w = _gauss_legendre(7)
    half = 0.5 * (grid[1:] - grid[:-1])
    mid = 0.5 * (grid[1:] + grid[:-1])
    nodes = mid[:, None] + half[:, None] * x[None, :]
    dens = np.exp(rho_logdensity(nodes.ravel(), params)).reshape(nodes.shape)
    masses = (dens @ w) * half
    cdf = np.concatenate([[0.0], np.cumsum(masses)])
    total = float(cdf[-1])
    if abs(total - 1.0) > _MASS_TOL:
        raise NumericsError(
            f"density mass {total!r} deviates from 1 beyond {_MASS_TOL:g}",
            error_estimate=abs(total - 1.0),
        )
    cdf /= total  # exact endpoints; the gate above bounds the distortion
    # Intervals with zero mass give pchip 0/0 slope ratios; it resolves
    # them to flat (derivative 0) segments, so silence the division noise.
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        interp = PchipInterpolator(grid, cdf)
    return grid, cdf, interp


def _cdf_table(params: CorrParams):
    """Cached table, built at the key's rounded rho_bar.

    Rounding rho_bar to 1e-4 before building makes the table a pure
    function of its key, so results cannot depend on which caller builds
    it first; the rounding error is an accepted part of the CDF budget.
    """
    key = _cdf_key(params)
    with _cdf_lock:
        table = _cdf_tables.get(key)
    if table is None:
        table = _build_cdf_table(key)
        with _cdf_lock:
            table = _cdf_tables.setdefault(key, table)
    return table


def clear_cdf_cache():
    with _cdf_lock:
        _cdf_tables.clear()


def rho_cdf(rho, params: CorrParams):
    """P(measured coefficient <= rho) from the cached table."""
    _, _, interp = _cdf_table(params)
    rho_arr = np.asarray(rho, dtype=np.float64)
    if rho_arr.size and float(np.abs(rho_arr).max()) > 1.0:
        raise InvalidParameter("rho must lie in [-1, 1]")
    out = np.clip(interp(rho_arr), 0.0, 1.0)
    return float(out) if rho_arr.ndim == 0 else out


def rho_quantile(p, params: CorrParams) -> float:
    """Smallest rho with rho_cdf(rho) >= p (inverse of the cached table)."""
    if not (0.0 <= p <= 1.0):
        raise InvalidParameter(f"quantile level must lie in [0, 1], got {p!r}")
    grid, cdf, interp = _cdf_table(params)
    if p <= cdf[0]:
        return -1.0
    if p >= cdf[-1]:
        return 1.0
    i = int(np.searchsorted(cdf, p))
    lo, hi = grid[i - 1], grid[i]
    if cdf[i] == cdf[i - 1]:
        return float(hi)
    return float(brentq(lambda r: float(interp(r)) - p, lo, hi, xtol=1e-12))
