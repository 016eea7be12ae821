"""Arrival-rate estimation and bandwidth selection.

The rate estimator is the kernel sum lambda_hat_h(t) = sum_i f_h(t, s_i)
evaluated on a uniform grid, with the boundary clamp: values on [0, bh)
and (T - bh, T] copy the estimates at bh and T - bh.

Bandwidth selection is the regression plug-in: estimate the right
derivative of the rate ACF at zero by regressing bias-corrected ACF
values at small lags on the analytic absolute-moment regressor, then

    h_opt = sqrt( mu * int f^2 / (C'(0+) * gamma_f) ),

which is well defined because both C'(0+) and gamma_f are negative for
fluctuating rates.  A nonnegative regression slope is reported as a
static-rate outcome rather than an error.

Two interchangeable evaluators compute the interior kernel sums: a
sliding-window pass over the sorted timestamps (numba, piecewise
polynomial kernels) and a chunked vectorized gather (any kernel).  Both
locate window members by binary search; they agree to roundoff and the
slower one doubles as the oracle in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import kernels as _kernels
from .errors import (
    BandwidthTooLargeError,
    EmptyDataError,
    InvalidBandwidthError,
    InvalidDataError,
    ParameterError,
)
from .kernels import Kernel

if TYPE_CHECKING:  # pragma: no cover
    from .simulate import RatePath

__all__ = [
    "ArrivalData",
    "RateEstimate",
    "BandwidthSelection",
    "mean_rate",
    "rate_on_grid",
    "estimate_rate",
    "pilot_bandwidth",
    "estimate_cprime0",
    "optimal_bandwidth",
    "analytic_optimal_bandwidth",
    "empirical_mise",
]

GRID_STEP_FRACTION = 10  # default evaluation step is h / 10

_GATHER_CHUNK_PAIRS = 1 << 22  # bounds transient memory of the gather path

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class ArrivalData:
    """Sorted event timestamps observed on the window [0, T]."""

    times: np.ndarray
    T: float

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1:
            raise InvalidDataError("timestamps must form a 1-d array")
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidDataError(f"horizon T must be positive, got {self.T}")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise InvalidDataError("timestamps must be finite")
            if times[0] < 0 or times[-1] > self.T:
                raise InvalidDataError("timestamps must lie within [0, T]")
            if np.any(np.diff(times) < 0):
                raise InvalidDataError("timestamps must be sorted ascending")

    @property
    def K(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class RateEstimate:
    """Kernel rate estimate on a uniform grid over [0, T].

    ``interior`` is the inclusive index range of grid points inside
    [bh, T - bh]; values outside it carry the boundary clamp.
    """

    grid: np.ndarray
    values: np.ndarray
    h: float
    kernel: Kernel
    T: float
    interior: tuple[int, int]

    @property
    def grid_step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def interior_values(self) -> np.ndarray:
        i0, i1 = self.interior
        return self.values[i0 : i1 + 1]


@dataclass(frozen=True)
class BandwidthSelection:
    """Outcome of the regression plug-in bandwidth selection.

    ``static`` is True when the data show no detectable rate fluctuation:
    the regression slope is not significantly negative (block-based
    standard error ``cprime0_se``), or the implied bandwidth would not
    fit the window.  ``h_opt`` is None in that case and the pilot
    bandwidth is the only usable scale.
    """

    h_opt: float | None
    cprime0: float
    mu_hat: float
    h_pilot: float
    static: bool
    cprime0_se: float = 0.0


def mean_rate(data: ArrivalData) -> float:
    """Unbiased mean-rate estimate K / T."""
    if data.T <= 0:
        raise InvalidDataError(f"horizon T must be positive, got {data.T}")
    return data.K / data.T


def _check_bandwidth(kernel: Kernel, h: float, T: float) -> None:
    if h <= 0 or not np.isfinite(h):
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h}")
    if 2.0 * kernel.b * h >= T:
        raise BandwidthTooLargeError(
            f"kernel support 2bh = {2 * kernel.b * h:.6g} does not fit in T = {T:.6g}"
        )


# ---------------------------------------------------------------------------
# interior evaluators

def _gather_eval(times: np.ndarray, grid: np.ndarray, kernel: Kernel, h: float) -> np.ndarray:
    """Reference evaluator: vectorized gather over binary-searched windows."""
    bh = kernel.b * h
    lo = np.searchsorted(times, grid - bh, side="left")
    hi = np.searchsorted(times, grid + bh, side="right")
    counts = hi - lo
    out = np.zeros(grid.size, dtype=float)
    cum = np.cumsum(counts)
    start = 0
    while start < grid.size:
        base = cum[start - 1] if start else 0
        stop = int(np.searchsorted(cum, base + _GATHER_CHUNK_PAIRS, side="left")) + 1
        stop = min(stop, grid.size)
        c = counts[start:stop]
        total = int(c.sum())
        if total:
            owner = np.repeat(np.arange(stop - start), c)
            offsets = np.arange(total) - np.repeat(np.cumsum(c) - c, c)
            idx = np.repeat(lo[start:stop], c) + offsets
            u = (times[idx] - grid[start:stop][owner]) / h
            out[start:stop] = np.bincount(owner, weights=kernel.pdf(u), minlength=stop - start)
        start = stop
    return out / h


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _bisect_left(a, x):  # pragma: no cover - compiled
        lo, hi = 0, a.size
        while lo < hi:
            mid = (lo + hi) // 2
            if a[mid] < x:
                lo = mid + 1
            else:
                hi = mid
        return lo

    @numba.njit(cache=True)
    def _bisect_right(a, x):  # pragma: no cover - compiled
        lo, hi = 0, a.size
        while lo < hi:
            mid = (lo + hi) // 2
            if a[mid] <= x:
                lo = mid + 1
            else:
                hi = mid
        return lo

    @numba.njit(cache=True)
    def _sliding_poly_eval(times, grid, h, lo_edges, hi_edges, coefs, refresh, out):  # pragma: no cover - compiled
        n_pieces, n_coef = coefs.shape
        n_grid = grid.size
        n_ev = times.size
        binom = np.zeros((n_coef, n_coef))
        for p in range(n_coef):
            binom[p, 0] = 1.0
            for q in range(1, p + 1):
                prev = binom[p - 1, q] if q <= p - 1 else 0.0
                binom[p, q] = binom[p - 1, q - 1] + prev
        hinv = np.empty(n_coef)
        hinv[0] = 1.0
        for p in range(1, n_coef):
            hinv[p] = hinv[p - 1] / h

        sums = np.zeros((n_pieces, n_coef))
        shifted = np.empty(n_coef)
        a_ptr = np.zeros(n_pieces, dtype=np.int64)
        b_ptr = np.zeros(n_pieces, dtype=np.int64)

        for j in range(n_grid):
            t = grid[j]
            if j % refresh == 0:
                # Fresh pointers and sums.  Translating power sums amplifies
                # roundoff like (distance/h)^degree, so the translation
                # distance between refreshes must stay a bounded multiple of h.
                for k in range(n_pieces):
                    lo_bound = t + lo_edges[k] * h
                    hi_bound = t + hi_edges[k] * h
                    a = _bisect_left(times, lo_bound)
                    if k == n_pieces - 1:
                        b = _bisect_right(times, hi_bound)
                    else:
                        b = _bisect_left(times, hi_bound)
                    a_ptr[k] = a
                    b_ptr[k] = b
                    for p in range(n_coef):
                        acc = 0.0
                        for i in range(a, b):
                            acc += (times[i] - t) ** p
                        sums[k, p] = acc
            else:
                delta = grid[j] - grid[j - 1]
                for k in range(n_pieces):
                    # shift power sums to the new origin t
                    for p in range(n_coef):
                        acc = 0.0
                        for q in range(p + 1):
                            acc += binom[p, q] * (-delta) ** (p - q) * sums[k, q]
                        shifted[p] = acc
                    for p in range(n_coef):
                        sums[k, p] = shifted[p]
                    lo_bound = t + lo_edges[k] * h
                    hi_bound = t + hi_edges[k] * h
                    # drop current members that fell below the window
                    a = a_ptr[k]
                    b = b_ptr[k]
                    while a < b and times[a] < lo_bound:
                        for p in range(n_coef):
                            sums[k, p] -= (times[a] - t) ** p
                        a += 1
                    # admit newly reachable events; if the window jumped
                    # past an event entirely, it never enters the sums
                    last = k == n_pieces - 1
                    while b < n_ev and (times[b] <= hi_bound if last else times[b] < hi_bound):
                        if times[b] < lo_bound:
                            a = b + 1
                        else:
                            for p in range(n_coef):
                                sums[k, p] += (times[b] - t) ** p
                        b += 1
                    a_ptr[k] = a
                    b_ptr[k] = b

            total = 0.0
            for k in range(n_pieces):
                for p in range(n_coef):
                    c = coefs[k, p]
                    if c != 0.0:
                        total += c * hinv[p] * sums[k, p]
            out[j] = total / h


def _piece_arrays(kernel: Kernel):
    pieces = kernel.pieces
    deg = max(len(coef) for _, _, coef in pieces)
    lo = np.array([p[0] for p in pieces], dtype=float)
    hi = np.array([p[1] for p in pieces], dtype=float)
    coefs = np.zeros((len(pieces), deg), dtype=float)
    for k, (_, _, coef) in enumerate(pieces):
        coefs[k, : len(coef)] = coef
    return lo, hi, coefs


def rate_on_grid(times: np.ndarray, grid: np.ndarray, kernel: Kernel, h: float) -> np.ndarray:
    """Kernel sums sum_i f((s_i - t)/h)/h at arbitrary ascending grid times.

    No boundary clamping is applied; this is the raw interior estimator.
    """
    if h <= 0:
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h}")
    times = np.ascontiguousarray(times, dtype=float)
    grid = np.ascontiguousarray(grid, dtype=float)
    if grid.size == 0 or times.size == 0:
        return np.zeros(grid.size, dtype=float)
    if _HAVE_NUMBA and kernel.pieces is not None:
        lo, hi, coefs = _piece_arrays(kernel)
        out = np.empty(grid.size, dtype=float)
        # keep inter-refresh translation below ~26 h: (26)^4 eps < 1e-10
        max_step = float(np.max(np.diff(grid))) if grid.size > 1 else h
        refresh = max(1, min(65536, int(26.0 * h / max(max_step, 1e-300))))
        _sliding_poly_eval(times, grid, float(h), lo, hi, coefs, refresh, out)
        return out
    return _gather_eval(times, grid, kernel, h)


def estimate_rate(
    data: ArrivalData,
    kernel: Kernel,
    h: float,
    grid_step: float | None = None,
) -> RateEstimate:
    """Evaluate the boundary-clamped rate estimate on a uniform grid.

    ``grid_step`` defaults to h / 10, fine enough to resolve kernel-scale
    structure.  Grid points below bh (above T - bh) copy the values at bh
    (T - bh).
    """
    _check_bandwidth(kernel, h, data.T)
    if grid_step is None:
        grid_step = h / GRID_STEP_FRACTION
    if grid_step <= 0:
        raise ParameterError(f"grid_step must be positive, got {grid_step}")
    n_steps = int(math.floor(data.T / grid_step + 1e-9))
    grid = np.arange(n_steps + 1, dtype=float) * grid_step
    bh = kernel.b * h
    i_lo = int(np.searchsorted(grid, bh, side="left"))
    i_hi = int(np.searchsorted(grid, data.T - bh, side="right")) - 1
    values = np.empty(grid.size, dtype=float)
    if i_lo <= i_hi:
        values[i_lo : i_hi + 1] = rate_on_grid(data.times, grid[i_lo : i_hi + 1], kernel, h)
    edges = rate_on_grid(data.times, np.array([bh, data.T - bh]), kernel, h)
    values[:i_lo] = edges[0]
    values[i_hi + 1 :] = edges[1]
    return RateEstimate(
        grid=grid, values=values, h=float(h), kernel=kernel, T=data.T,
        interior=(i_lo, i_hi),
    )


def pilot_bandwidth(data: ArrivalData, rho: float) -> float:
    """Initial bandwidth rho / mu_hat containing rho events on average."""
    if rho <= 0:
        raise ParameterError(f"rho must be positive, got {rho}")
    if data.K == 0:
        raise EmptyDataError("cannot form a pilot bandwidth without events")
    return rho * data.T / data.K


def _interior_centered(est: RateEstimate, mu_hat: float) -> np.ndarray:
    d = est.interior_values() - mu_hat
    if d.size == 0:
        raise BandwidthTooLargeError(
            "no interior grid points: bandwidth too large for the window"
        )
    return d


def _raw_acf_at_index(centered: np.ndarray, m: int) -> float:
    n = centered.size
    return float(np.dot(centered[: n - m], centered[m:]) / (n - m))


def _ols_slope(xs: np.ndarray, ys: np.ndarray) -> float:
    xc = xs - xs.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0.0:
        return 0.0
    return float(np.dot(xc, ys - ys.mean()) / denom)


def _cprime0_with_se(
    data: ArrivalData,
    kernel: Kernel,
    h_pilot: float,
    n_points: int = 10,
    grid_step: float | None = None,
    n_blocks: int = 8,
) -> tuple[float, float]:
    """OLS slope of the small-lag regression plus a block-based standard error.

    The error is the spread of per-block slopes over ``n_blocks``
    contiguous segments of the window; it is 0 when the window is too
    short to form blocks that dominate the largest regression lag.
    """
    if n_points < 3:
        raise ParameterError(f"regression needs at least 3 points, got {n_points}")
    _check_bandwidth(kernel, h_pilot, data.T)
    est = estimate_rate(data, kernel, h_pilot, grid_step)
    mu_hat = mean_rate(data)
    centered = _interior_centered(est, mu_hat)
    step = est.grid_step
    two_bh = 2.0 * kernel.b * h_pilot
    lag_idx = np.unique(np.rint(np.arange(n_points) * two_bh / n_points / step).astype(int))
    lag_idx = lag_idx[lag_idx < centered.size]
    if lag_idx.size < 3:
        raise ParameterError(
            "grid too coarse for the derivative regression; decrease grid_step"
        )
    xs = np.empty(lag_idx.size)
    corr = np.empty(lag_idx.size)
    for i, m in enumerate(lag_idx):
        lag = m * step
        corr[i] = mu_hat / h_pilot * _kernels.autoconvolution(kernel, lag / h_pilot)
        xs[i] = _kernels.abs_moment_integral(kernel, lag, h_pilot)

    def regression(d: np.ndarray) -> float:
        ys = np.array(
            [_raw_acf_at_index(d, int(m)) for m in lag_idx]
        ) - corr
        return _ols_slope(xs, ys)

    slope = regression(centered)
    max_lag = int(lag_idx[-1])
    if centered.size < n_blocks * max(4 * max_lag, 8):
        return slope, 0.0
    bounds = np.linspace(0, centered.size, n_blocks + 1).astype(int)
    block_slopes = np.array(
        [regression(centered[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    )
    se = float(block_slopes.std(ddof=1) / math.sqrt(n_blocks))
    return slope, se


def estimate_cprime0(
    data: ArrivalData,
    kernel: Kernel,
    h_pilot: float,
    n_points: int = 10,
    grid_step: float | None = None,
) -> float:
    """Regression estimate of the ACF right derivative at zero.

    Bias-corrected ACF values at ``n_points`` evenly spaced lags in
    [0, 2b h) are regressed on the absolute-moment regressor; the OLS
    slope estimates C'(0+).  A nonnegative slope signals a static rate;
    the caller decides how to proceed.
    """
    slope, _ = _cprime0_with_se(data, kernel, h_pilot, n_points, grid_step)
    return slope


def analytic_optimal_bandwidth(mu: float, cprime0: float, kernel: Kernel) -> float:
    """MISE-optimal bandwidth from known mean rate and ACF derivative."""
    if mu <= 0:
        raise ParameterError(f"mean rate must be positive, got {mu}")
    if cprime0 >= 0:
        raise ParameterError(
            f"C'(0+) must be negative for a fluctuating rate, got {cprime0}"
        )
    ratio = mu * _kernels.squared_integral(kernel) / (cprime0 * _kernels.gamma_f(kernel))
    return math.sqrt(ratio)


STATIC_Z_THRESHOLD = 2.0  # slope must be this many block SEs below zero


def optimal_bandwidth(
    data: ArrivalData,
    kernel: Kernel,
    rho: float = 5.0,
    n_points: int = 10,
    grid_step: float | None = None,
) -> BandwidthSelection:
    """Plug-in bandwidth selection; static data yield a flagged result.

    The static flag fires when the regression slope is statistically
    indistinguishable from zero (not below -2 block standard errors),
    and also when the implied bandwidth would smooth over a quarter of
    the window or more, in which case it is unusable anyway.
    """
    h_pilot = pilot_bandwidth(data, rho)
    slope, se = _cprime0_with_se(data, kernel, h_pilot, n_points, grid_step)
    mu_hat = mean_rate(data)
    if slope < -STATIC_Z_THRESHOLD * se:
        h_opt = analytic_optimal_bandwidth(mu_hat, slope, kernel)
        if 2.0 * kernel.b * h_opt < data.T / 4.0:
            return BandwidthSelection(
                h_opt=h_opt, cprime0=slope, mu_hat=mu_hat, h_pilot=h_pilot,
                static=False, cprime0_se=se,
            )
    return BandwidthSelection(
        h_opt=None, cprime0=slope, mu_hat=mu_hat, h_pilot=h_pilot,
        static=True, cprime0_se=se,
    )


def empirical_mise(estimate: RateEstimate, truth: "RatePath", mu_hat: float) -> float:
    """Normalized empirical MISE against a known rate path.

    Computes integral of (lambda_hat - lambda)^2 over [0, T] on the
    estimate's grid, normalized by T mu_hat^2.
    """
    if mu_hat <= 0:
        raise ParameterError(f"mu_hat must be positive, got {mu_hat}")
    if abs(truth.T - estimate.T) > 1e-9 * max(truth.T, estimate.T):
        raise InvalidDataError(
            f"horizon mismatch: estimate T = {estimate.T}, truth T = {truth.T}"
        )
    diff = estimate.values - truth.rate_at(estimate.grid)
    return float(np.trapezoid(diff * diff, estimate.grid) / (estimate.T * mu_hat**2))
