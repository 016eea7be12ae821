"""Variance approximation for the ACF estimate and pointwise intervals.

The variance of the ACF estimate at lag t is approximated by the rate
fluctuation term alone (dominant for large mean rates):

    V_hat(t) = 2 / (T - 2bh - t)^2
               * int_0^{T - t - 2bh} (T - t - 2bh - r) cov_hat(t, r) dr,

where cov_hat(t, r) is the clamped empirical covariance of the centered
product series a(s) = (lambda_hat(s) - mu_hat)(lambda_hat(s + t) - mu_hat)
at separation r, each normalized by its available integration length.

The r-integral needs the autocorrelation of a(s) at every separation; the
fast path computes all of them in one zero-padded FFT pass, which must
(and does, to roundoff) agree with the direct quadratic-time evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .acf import AcfEstimate
from .errors import LagOutOfRangeError, ParameterError
from .rate import RateEstimate, _interior_centered, _raw_acf_at_index

__all__ = [
    "CiBand",
    "empirical_cov4",
    "variance_estimate",
    "confidence_interval",
    "confidence_band",
]


@dataclass(frozen=True)
class CiBand:
    """Pointwise confidence band around the bias-corrected ACF."""

    lags: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    variance: np.ndarray
    alpha: float

    def __post_init__(self):
        if np.any(self.variance < 0):
            raise ParameterError("variance estimates must be nonnegative")
        if np.any(self.lower > self.upper):
            raise ParameterError("lower bound exceeds upper bound")


def _product_series(est: RateEstimate, mu_hat: float, t: float):
    """Centered product series a_j at lag t, its mean (the raw ACF), and grid info."""
    d = _interior_centered(est, mu_hat)
    n = d.size
    limit = est.T - 2.0 * est.kernel.b * est.h
    if t < 0:
        raise ParameterError(f"lag must be nonnegative, got {t}")
    if t >= limit:
        raise LagOutOfRangeError(f"lag {t:.6g} exceeds usable range {limit:.6g}")
    m = int(round(t / est.grid_step))
    if m >= n:
        raise LagOutOfRangeError(f"lag {t:.6g} leaves no overlap on the grid")
    a = d[: n - m] * d[m:]
    return a, _raw_acf_at_index(d, m), m


def empirical_cov4(rate_grid: RateEstimate, mu_hat: float, t: float, r: float) -> float:
    """Clamped empirical fourth-moment covariance cov_hat(t, r) >= 0."""
    a, chat, m_t = _product_series(rate_grid, mu_hat, t)
    if r < 0:
        raise ParameterError(f"separation must be nonnegative, got {r}")
    m_r = int(round(r / rate_grid.grid_step))
    if m_r >= a.size:
        raise LagOutOfRangeError(
            f"separation {r:.6g} plus lag {t:.6g} exceeds the usable window"
        )
    inner = float(np.dot(a[: a.size - m_r], a[m_r:]) / (a.size - m_r))
    return max(inner - chat * chat, 0.0)


def _shift_sums_fft(a: np.ndarray) -> np.ndarray:
    n2 = 1 << int(2 * a.size - 1).bit_length()
    spec = np.fft.rfft(a, n2)
    return np.fft.irfft(spec * np.conj(spec), n2)[: a.size]


def _shift_sums_direct(a: np.ndarray) -> np.ndarray:
    n = a.size
    return np.array([np.dot(a[: n - m], a[m:]) for m in range(n)])


def variance_estimate(
    rate_grid: RateEstimate,
    mu_hat: float,
    t: float,
    method: str = "fft",
    r_max: float | str | None = "auto",
) -> float:
    """Triangular-weighted integral of cov_hat(t, r) over separations r.

    ``method="fft"`` computes every separation in one convolution pass;
    ``method="direct"`` is the quadratic-time reference.

    ``r_max`` controls where the r-integration stops.  The default
    ``"auto"`` integrates the initial positive run of the covariance,
    stopping at its first nonpositive value: the clamp would otherwise
    rectify pure estimation noise over the long tail where the true
    covariance has already died out, inflating the variance by an amount
    that grows like sqrt(T).  ``None`` integrates the full displayed
    range with the pointwise clamp; a float truncates at that separation.
    """
    a, chat, m_t = _product_series(rate_grid, mu_hat, t)
    if method == "fft":
        sums = _shift_sums_fft(a)
    elif method == "direct":
        sums = _shift_sums_direct(a)
    else:
        raise ParameterError(f"unknown method {method!r}; use 'fft' or 'direct'")
    counts = a.size - np.arange(a.size)
    emp = sums / counts - chat * chat
    cov = np.maximum(emp, 0.0)
    step = rate_grid.grid_step
    span = rate_grid.T - 2.0 * rate_grid.kernel.b * rate_grid.h - m_t * step
    r = np.arange(a.size) * step
    weights = np.maximum(span - r, 0.0)
    if isinstance(r_max, str):
        if r_max != "auto":
            raise ParameterError(f"r_max must be 'auto', None or a float, got {r_max!r}")
        nonpos = np.nonzero(emp <= 0.0)[0]
        if nonpos.size:
            weights[nonpos[0] :] = 0.0
    elif r_max is not None:
        weights[r > r_max] = 0.0
    return float(2.0 / span**2 * step * np.dot(weights, cov))


def confidence_interval(corrected, variance, alpha: float):
    """Normal pointwise interval: center +/- z_{1-alpha/2} sqrt(variance)."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ParameterError("variance must be nonnegative")
    corrected = np.asarray(corrected, dtype=float)
    half = ndtri(1.0 - alpha / 2.0) * np.sqrt(variance)
    return corrected - half, corrected + half


def confidence_band(
    acf: AcfEstimate,
    grids: dict[float, RateEstimate],
    alpha: float = 0.05,
    r_max: float | str | None = "auto",
) -> CiBand:
    """Variance and interval per lag, using each lag's own rate grid."""
    variance = np.array(
        [
            variance_estimate(grids[h], acf.mu_hat, lag, r_max=r_max)
            for lag, h in zip(acf.lags, acf.h_used)
        ]
    )
    lower, upper = confidence_interval(acf.corrected, variance, alpha)
    return CiBand(
        lags=acf.lags.copy(),
        center=acf.corrected.copy(),
        lower=lower,
        upper=upper,
        variance=variance,
        alpha=alpha,
    )
