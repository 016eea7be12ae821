"""Exact simulators for Cox process data with known ground truth.

Two rate-process families are provided, matching the classic models used
for photon arrival data, plus a degenerate constant-rate model:

* ``TwoStateModel``    -- a continuous-time two-state Markov chain jumping
  between rates lam_a and lam_b with transition rates k1 (leaving A) and
  k2 (leaving B).
* ``LogGaussianModel`` -- lambda(t) = M exp(W(t)) where W is a stationary
  zero-mean Gaussian process with ACF gamma(t) = 1/(1 + a|t|)^H, realized
  piecewise-constantly from a discrete skeleton of step eps.
* ``ConstantModel``    -- lambda(t) = rate; the static (zero ACF) case.

All rate paths are piecewise constant, so arrivals are drawn exactly:
per segment, a Poisson count followed by uniform placement.  Gaussian
skeletons are exact stationary draws via circulant embedding, with a
Cholesky fallback for short skeletons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ParameterError, SimulationError
from .rate import ArrivalData

__all__ = [
    "TwoStateModel",
    "LogGaussianModel",
    "ConstantModel",
    "RatePath",
    "simulate_two_state_path",
    "simulate_log_gaussian_path",
    "simulate_constant_path",
    "simulate_path",
    "simulate_arrivals",
    "true_mean",
    "true_acf",
    "true_cprime0",
]

# Skeleton step resolves the ACF to within 1% of its zero-lag value.
_EPS_ACF_FRACTION = 0.99
# Largest circulant size attempted before declaring an embedding failure.
_MAX_EMBED_SIZE = 1 << 25
# Skeletons at most this long may fall back to a dense Cholesky factor.
_CHOLESKY_MAX = 8192


@dataclass(frozen=True)
class TwoStateModel:
    """Two-state Markov-chain arrival rate: A (lam_a) <-> B (lam_b)."""

    k1: float  # transition rate A -> B
    k2: float  # transition rate B -> A
    lam_a: float
    lam_b: float

    def __post_init__(self):
        if min(self.k1, self.k2, self.lam_a, self.lam_b) <= 0:
            raise ParameterError("two-state model requires strictly positive rates")

    @property
    def stationary_p_a(self) -> float:
        return self.k2 / (self.k1 + self.k2)


@dataclass(frozen=True)
class LogGaussianModel:
    """Log-Gaussian arrival rate lambda(t) = M exp(W(t)).

    W is stationary zero-mean Gaussian with ACF gamma(t) = 1/(1 + a|t|)^H.
    ``eps`` is the skeleton step; when omitted it is chosen so that
    gamma(eps) >= 0.99 gamma(0), i.e. the skeleton resolves the ACF where
    its derivative at zero lives.
    """

    M: float
    a: float
    H: float
    eps: float | None = None

    def __post_init__(self):
        if min(self.M, self.a, self.H) <= 0:
            raise ParameterError("log-Gaussian model requires M, a, H > 0")
        if self.eps is None:
            step = (_EPS_ACF_FRACTION ** (-1.0 / self.H) - 1.0) / self.a
            object.__setattr__(self, "eps", step)
        elif self.eps <= 0:
            raise ParameterError("skeleton step eps must be positive")

    def gamma(self, t) -> np.ndarray:
        """Skeleton ACF gamma(t) = 1/(1 + a|t|)^H."""
        return (1.0 + self.a * np.abs(np.asarray(t, dtype=float))) ** (-self.H)


@dataclass(frozen=True)
class ConstantModel:
    """Static arrival rate, C(t) = 0 for t > 0."""

    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ParameterError("constant rate must be nonnegative")


@dataclass(frozen=True)
class RatePath:
    """Piecewise-constant rate path on [0, T].

    ``values[i]`` applies on [breakpoints[i], breakpoints[i+1]) with an
    implicit final breakpoint at T.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    T: float

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if not (np.isfinite(self.T) and self.T > 0):
            raise ParameterError(f"horizon T must be positive, got {self.T}")
        if bp.size == 0 or bp[0] != 0.0 or bp[-1] >= self.T:
            raise ParameterError("breakpoints must start at 0 and end before T")
        if np.any(np.diff(bp) <= 0):
            raise ParameterError("breakpoints must be strictly increasing")
        if vals.shape != bp.shape:
            raise ParameterError("values and breakpoints must have equal length")
        if np.any(vals < 0):
            raise ParameterError("rate values must be nonnegative")

    def rate_at(self, t) -> np.ndarray:
        """Rate value at time(s) t in [0, T]."""
        idx = np.clip(
            np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side="right") - 1,
            0,
            len(self.values) - 1,
        )
        return self.values[idx]

    def segment_lengths(self) -> np.ndarray:
        return np.diff(np.concatenate([self.breakpoints, [self.T]]))

    def time_average(self) -> float:
        return float(np.dot(self.values, self.segment_lengths()) / self.T)


def simulate_two_state_path(model: TwoStateModel, T: float, seed) -> RatePath:
    """Draw one two-state Markov chain path on [0, T].

    The initial state follows the stationary distribution; holding times
    are exponential with rate k1 in A and k2 in B.
    """
    if T <= 0:
        raise ParameterError(f"horizon T must be positive, got {T}")
    rng = np.random.default_rng(seed)
    start_in_a = rng.random() < model.stationary_p_a
    hold = (model.k1, model.k2) if start_in_a else (model.k2, model.k1)
    lam = (model.lam_a, model.lam_b) if start_in_a else (model.lam_b, model.lam_a)

    blocks = []
    total = 0.0
    parity = 0
    expected_jumps = T * 2.0 * model.k1 * model.k2 / (model.k1 + model.k2)
    block_size = max(64, int(expected_jumps * 1.25) + 16)
    while total < T:
        z = rng.standard_exponential(block_size)
        idx = np.arange(block_size) + parity
        z /= np.where(idx % 2 == 0, hold[0], hold[1])
        blocks.append(z)
        total += z.sum()
        parity = (parity + block_size) % 2
        block_size = max(64, block_size // 2)
    holds = np.concatenate(blocks)
    ends = np.cumsum(holds)
    n_jumps = int(np.searchsorted(ends, T, side="left"))
    breakpoints = np.concatenate([[0.0], ends[:n_jumps]])
    values = np.where(np.arange(n_jumps + 1) % 2 == 0, lam[0], lam[1]).astype(float)
    return RatePath(breakpoints=breakpoints, values=values, T=float(T))


def _stationary_gaussian(cov_of_lag, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draw of n points of a stationary Gaussian sequence.

    ``cov_of_lag`` maps integer lag arrays to autocovariances.  Uses
    circulant embedding, doubling the embedding until its spectrum is
    nonnegative; falls back to a Cholesky factor of the Toeplitz
    covariance for short sequences.
    """
    if n == 1:
        return rng.standard_normal(1) * math.sqrt(float(cov_of_lag(np.array([0]))))
    m = 1 << int(math.ceil(math.log2(2 * (n - 1))))
    while m <= _MAX_EMBED_SIZE:
        lags = np.minimum(np.arange(m), m - np.arange(m))
        row = cov_of_lag(lags)
        eig = np.fft.fft(row).real
        floor = -1e-8 * eig.max()
        if eig.min() >= floor:
            coef = np.sqrt(np.clip(eig, 0.0, None) / m)
            z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            return np.fft.fft(z * coef).real[:n]
        m *= 2
    if n <= _CHOLESKY_MAX:
        cov = linalg.toeplitz(cov_of_lag(np.arange(n)))
        chol = linalg.cholesky(cov, lower=True)
        return chol @ rng.standard_normal(n)
    raise SimulationError(
        f"circulant embedding failed: spectrum stayed negative up to size "
        f"{_MAX_EMBED_SIZE} and the skeleton ({n} points) is too long for a "
        f"dense Cholesky fallback"
    )


def simulate_log_gaussian_path(model: LogGaussianModel, T: float, seed) -> RatePath:
    """Draw one log-Gaussian rate path on [0, T] from its discrete skeleton."""
    if T <= 0:
        raise ParameterError(f"horizon T must be positive, got {T}")
    rng = np.random.default_rng(seed)
    eps = float(model.eps)
    n = int(math.ceil(T / eps))
    w = _stationary_gaussian(lambda lags: model.gamma(lags * eps), n, rng)
    breakpoints = np.arange(n) * eps
    return RatePath(breakpoints=breakpoints, values=model.M * np.exp(w), T=float(T))


def simulate_constant_path(model: ConstantModel, T: float, seed=None) -> RatePath:
    if T <= 0:
        raise ParameterError(f"horizon T must be positive, got {T}")
    return RatePath(
        breakpoints=np.array([0.0]), values=np.array([model.rate]), T=float(T)
    )


def simulate_path(model, T: float, seed) -> RatePath:
    """Dispatch to the model-specific path simulator."""
    if isinstance(model, TwoStateModel):
        return simulate_two_state_path(model, T, seed)
    if isinstance(model, LogGaussianModel):
        return simulate_log_gaussian_path(model, T, seed)
    if isinstance(model, ConstantModel):
        return simulate_constant_path(model, T, seed)
    raise ParameterError(f"unsupported model type {type(model).__name__}")


def simulate_arrivals(path: RatePath, seed) -> ArrivalData:
    """Draw arrivals of the Poisson process driven by a piecewise rate path.

    Within each constant segment the count is Poisson(rate * length) and
    the events are uniform on the segment, which is exact for piecewise
    constant paths.
    """
    rng = np.random.default_rng(seed)
    lengths = path.segment_lengths()
    counts = rng.poisson(path.values * lengths)
    total = int(counts.sum())
    starts = np.repeat(path.breakpoints, counts)
    spans = np.repeat(lengths, counts)
    times = starts + rng.random(total) * spans
    times.sort()
    return ArrivalData(times=times, T=path.T)


def true_mean(model) -> float:
    """Exact mean arrival rate E lambda(0) of a model."""
    if isinstance(model, TwoStateModel):
        return (model.k2 * model.lam_a + model.k1 * model.lam_b) / (model.k1 + model.k2)
    if isinstance(model, LogGaussianModel):
        return model.M * math.exp(0.5)  # gamma(0) = 1 for this family
    if isinstance(model, ConstantModel):
        return model.rate
    raise ParameterError(f"unsupported model type {type(model).__name__}")


def true_acf(model, t) -> np.ndarray:
    """Exact rate ACF C(t) = cov(lambda(0), lambda(t)) of a model."""
    t = np.abs(np.asarray(t, dtype=float))
    if isinstance(model, TwoStateModel):
        ksum = model.k1 + model.k2
        c0 = (model.lam_a - model.lam_b) ** 2 * model.k1 * model.k2 / ksum**2
        return c0 * np.exp(-ksum * t)
    if isinstance(model, LogGaussianModel):
        return model.M**2 * math.e * (np.exp(model.gamma(t)) - 1.0)
    if isinstance(model, ConstantModel):
        return np.zeros_like(t)
    raise ParameterError(f"unsupported model type {type(model).__name__}")


def model_metadata(model) -> dict:
    """Name and parameters of a model, for output metadata sidecars."""
    if isinstance(model, TwoStateModel):
        return {"model": "two-state", "k1": model.k1, "k2": model.k2,
                "lam_a": model.lam_a, "lam_b": model.lam_b}
    if isinstance(model, LogGaussianModel):
        return {"model": "log-gaussian", "M": model.M, "a": model.a,
                "H": model.H, "eps": model.eps}
    if isinstance(model, ConstantModel):
        return {"model": "constant", "rate": model.rate}
    raise ParameterError(f"unsupported model type {type(model).__name__}")


def true_cprime0(model) -> float:
    """Exact right derivative C'(0+) of the model ACF."""
    if isinstance(model, TwoStateModel):
        ksum = model.k1 + model.k2
        return -ksum * float(true_acf(model, 0.0))
    if isinstance(model, LogGaussianModel):
        # d/dt gamma at 0+ is -aH; chain rule through M^2 e exp(gamma)
        return -model.M**2 * math.e**2 * model.a * model.H
    if isinstance(model, ConstantModel):
        return 0.0
    raise ParameterError(f"unsupported model type {type(model).__name__}")
