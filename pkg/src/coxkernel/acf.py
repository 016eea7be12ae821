"""Autocorrelation estimation for the arrival-rate process.

The raw estimator integrates the centered product of the rate estimate
against itself at a lag, over the part of the window where the estimate
is unclamped:

    C_hat(t) = mean over s in [bh, T - bh - t] of
               (lambda_hat(s + t) - mu_hat)(lambda_hat(s) - mu_hat)

Lags below 2bh pick up a self-overlap bias mu/h * int f(r + t/h) f(r) dr
from events contributing to both factors; ``bias_correct`` removes it.

The per-lag bandwidth policy uses the plug-in optimal bandwidth for lags
at least 2b h_opt and min(pilot, h_opt) below, where the pilot bandwidth
keeps about rho events under the kernel.  Lags are rounded to the nearest
multiple of the evaluation grid step of the bandwidth that serves them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as _kernels
from .errors import (
    InvalidBandwidthError,
    LagOutOfRangeError,
    ParameterError,
    StaticRateError,
)
from .kernels import Kernel
from .rate import (
    ArrivalData,
    BandwidthSelection,
    RateEstimate,
    _interior_centered,
    _raw_acf_at_index,
    estimate_rate,
    mean_rate,
    optimal_bandwidth,
)

__all__ = [
    "AcfEstimate",
    "BandwidthPolicy",
    "estimate_acf_raw",
    "bias_correct",
    "bandwidth_policy",
    "rate_grids_for_policy",
    "estimate_acf_curve",
    "log_lag_grid",
]


@dataclass(frozen=True)
class AcfEstimate:
    """Per-lag raw and bias-corrected ACF values.

    ``lags`` are the grid-rounded lags actually evaluated;
    ``requested_lags`` preserves the caller's values.  ``corrected``
    equals ``raw`` wherever the lag is at least 2b * h_used.
    """

    lags: np.ndarray
    raw: np.ndarray
    corrected: np.ndarray
    h_used: np.ndarray
    mu_hat: float
    kernel: Kernel
    requested_lags: np.ndarray


@dataclass(frozen=True)
class BandwidthPolicy:
    """Two-regime lag-to-bandwidth map: h_small below ``threshold``, h_large at or above."""

    h_small: float
    h_large: float
    threshold: float

    def bandwidth_for(self, t: float) -> float:
        return self.h_large if t >= self.threshold else self.h_small

    def distinct_bandwidths(self) -> tuple[float, ...]:
        return (self.h_small,) if self.h_small == self.h_large else (self.h_small, self.h_large)

    @classmethod
    def single(cls, h: float) -> "BandwidthPolicy":
        """Degenerate one-bandwidth policy (static-rate pipelines)."""
        return cls(h_small=h, h_large=h, threshold=0.0)


def _lag_index(est: RateEstimate, t: float, n_interior: int) -> int:
    if t < 0:
        raise ParameterError(f"lag must be nonnegative, got {t}")
    limit = est.T - 2.0 * est.kernel.b * est.h
    if t >= limit:
        raise LagOutOfRangeError(
            f"lag {t:.6g} exceeds usable range T - 2bh = {limit:.6g}"
        )
    m = int(round(t / est.grid_step))
    if m >= n_interior:
        raise LagOutOfRangeError(
            f"lag {t:.6g} leaves no overlap on the evaluation grid"
        )
    return m


def estimate_acf_raw(
    data: ArrivalData,
    kernel: Kernel,
    h: float,
    t: float,
    grid_step: float | None = None,
) -> float:
    """Raw kernel ACF estimate at a single lag (no bias correction)."""
    est = estimate_rate(data, kernel, h, grid_step)
    mu_hat = mean_rate(data)
    centered = _interior_centered(est, mu_hat)
    m = _lag_index(est, t, centered.size)
    return _raw_acf_at_index(centered, m)


def bias_correct(raw: float, mu_hat: float, kernel: Kernel, h: float, t: float) -> float:
    """Remove the small-lag self-overlap bias; identity for t >= 2bh."""
    if h <= 0:
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h}")
    if t < 0:
        raise ParameterError(f"lag must be nonnegative, got {t}")
    if t >= 2.0 * kernel.b * h or mu_hat == 0.0:
        return raw
    return raw - mu_hat / h * _kernels.autoconvolution(kernel, t / h)


def bandwidth_policy(
    data: ArrivalData,
    kernel: Kernel,
    rho: float = 5.0,
    selection: BandwidthSelection | None = None,
) -> BandwidthPolicy:
    """Build the two-regime policy from a (possibly precomputed) selection."""
    if selection is None:
        selection = optimal_bandwidth(data, kernel, rho)
    if selection.static:
        raise StaticRateError(
            "no detectable rate fluctuation: the optimal bandwidth is undefined; "
            "use the pilot bandwidth throughout"
        )
    h_small = min(selection.h_pilot, selection.h_opt)
    return BandwidthPolicy(
        h_small=h_small,
        h_large=selection.h_opt,
        threshold=2.0 * kernel.b * selection.h_opt,
    )


def rate_grids_for_policy(
    data: ArrivalData,
    kernel: Kernel,
    policy: BandwidthPolicy,
    grid_step: float | None = None,
) -> dict[float, RateEstimate]:
    """Rate estimates for each distinct policy bandwidth, computed once."""
    return {
        h: estimate_rate(data, kernel, h, grid_step)
        for h in policy.distinct_bandwidths()
    }


def log_lag_grid(T: float, smallest: float, n: int = 40) -> np.ndarray:
    """Logarithmically spaced lags from ``smallest`` to T/10."""
    if not (0 < smallest < T / 10.0):
        raise ParameterError(
            f"need 0 < smallest lag < T/10, got {smallest} with T = {T}"
        )
    return np.geomspace(smallest, T / 10.0, n)


def estimate_acf_curve(
    data: ArrivalData,
    kernel: Kernel,
    lag_grid,
    rho: float = 5.0,
    selection: BandwidthSelection | None = None,
    policy: BandwidthPolicy | None = None,
    grids: dict[float, RateEstimate] | None = None,
    grid_step: float | None = None,
) -> AcfEstimate:
    """Raw and bias-corrected ACF values over a lag grid.

    Applies the bandwidth policy per lag and reuses one rate grid per
    distinct bandwidth.  Pass ``policy`` (for example
    ``BandwidthPolicy.single(h_pilot)``) to bypass bandwidth selection,
    or ``grids`` to reuse precomputed rate estimates.
    """
    lags = np.atleast_1d(np.asarray(lag_grid, dtype=float))
    if lags.size == 0:
        raise ParameterError("lag grid is empty")
    if np.any(lags < 0):
        raise ParameterError("lags must be nonnegative")
    if policy is None:
        policy = bandwidth_policy(data, kernel, rho, selection)
    if grids is None:
        grids = rate_grids_for_policy(data, kernel, policy, grid_step)
    mu_hat = mean_rate(data)
    centered = {h: _interior_centered(est, mu_hat) for h, est in grids.items()}

    used = np.empty(lags.size)
    rounded = np.empty(lags.size)
    raw = np.empty(lags.size)
    corrected = np.empty(lags.size)
    for i, t in enumerate(lags):
        h = policy.bandwidth_for(float(t))
        est = grids[h]
        d = centered[h]
        m = _lag_index(est, float(t), d.size)
        lag = m * est.grid_step
        value = _raw_acf_at_index(d, m)
        used[i] = h
        rounded[i] = lag
        raw[i] = value
        corrected[i] = bias_correct(value, mu_hat, kernel, h, lag)
    return AcfEstimate(
        lags=rounded,
        raw=raw,
        corrected=corrected,
        h_used=used,
        mu_hat=mu_hat,
        kernel=kernel,
        requested_lags=lags,
    )
