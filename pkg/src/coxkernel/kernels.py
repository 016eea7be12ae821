"""Smoothing kernels and the constants the rate/ACF estimators need.

A kernel here is a symmetric density f on a bounded support [-b, b].
Four classical kernels are built in (uniform, Epanechnikov, triangular,
quartic), all with b = 1 and piecewise-polynomial densities, which lets
every derived constant be evaluated exactly by fixed-order Gauss-Legendre
quadrature.  Custom kernels can be loaded from a two-column table and fall
back to adaptive quadrature.

Derived quantities:

* ``squared_integral``   -- integral of f^2, the variance-side constant of
  the bandwidth rule.
* ``gamma_f``            -- E|r1 - r2| - 2 E|r| for r, r1, r2 ~ f; strictly
  negative for any density, the bias-side constant of the bandwidth rule.
* ``autoconvolution``    -- integral of f(r + x) f(r) dr, the self-overlap
  weight removed by the small-lag bias correction.
* ``abs_moment_integral``-- E|t + (r1 - r2) h|, the regressor used by the
  slope-based plug-in for the ACF derivative at zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate

from .errors import InvalidBandwidthError, ParameterError

__all__ = [
    "Kernel",
    "KERNELS",
    "get_kernel",
    "load_kernel_table",
    "eval_scaled",
    "squared_integral",
    "gamma_f",
    "autoconvolution",
    "abs_moment_integral",
]

# One polynomial piece of a density: (lo, hi, coefficients low->high degree).
PolyPiece = tuple[float, float, tuple[float, ...]]

_MASS_TOL = 1e-10


@dataclass(frozen=True)
class Kernel:
    """A symmetric density with bounded support [-b, b].

    ``pdf``/``cdf`` are vectorized callables.  ``pieces`` carries the
    piecewise-polynomial representation when one exists; it enables the
    exact quadratures here and the fast sliding-window rate evaluator.
    ``sq_integral`` and ``gamma`` cache closed forms when known.
    """

    name: str
    b: float
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray] | None = None
    pieces: tuple[PolyPiece, ...] | None = None
    sq_integral: float | None = None
    gamma: float | None = None

    def __repr__(self) -> str:  # callables make the default repr unreadable
        return f"Kernel(name={self.name!r}, b={self.b})"


def _poly_pdf(pieces: Sequence[PolyPiece]) -> Callable[[np.ndarray], np.ndarray]:
    def pdf(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for lo, hi, coef in pieces:
            mask = (u >= lo) & (u <= hi)
            if np.any(mask):
                out[mask] = np.polynomial.polynomial.polyval(u[mask], coef)
        return out

    return pdf


def _uniform_cdf(u):
    return np.clip((np.asarray(u, dtype=float) + 1.0) / 2.0, 0.0, 1.0)


def _clipped_cdf(inner):
    def cdf(u):
        u = np.asarray(u, dtype=float)
        x = np.clip(u, -1.0, 1.0)
        val = np.clip(inner(x), 0.0, 1.0)
        return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, 1.0, val))

    return cdf


_epanechnikov_cdf = _clipped_cdf(lambda u: 0.5 + 0.75 * (u - u**3 / 3.0))
_triangular_cdf = _clipped_cdf(
    lambda u: np.where(u <= 0.0, 0.5 * (1.0 + u) ** 2, 1.0 - 0.5 * (1.0 - u) ** 2)
)
_quartic_cdf = _clipped_cdf(lambda u: 0.5 + 0.9375 * (u - 2.0 * u**3 / 3.0 + u**5 / 5.0))


_UNIFORM_PIECES: tuple[PolyPiece, ...] = ((-1.0, 1.0, (0.5,)),)
_EPAN_PIECES: tuple[PolyPiece, ...] = ((-1.0, 1.0, (0.75, 0.0, -0.75)),)
_TRI_PIECES: tuple[PolyPiece, ...] = ((-1.0, 0.0, (1.0, 1.0)), (0.0, 1.0, (1.0, -1.0)))
_QUARTIC_PIECES: tuple[PolyPiece, ...] = (
    (-1.0, 1.0, (15.0 / 16.0, 0.0, -15.0 / 8.0, 0.0, 15.0 / 16.0)),
)

KERNELS: dict[str, Kernel] = {
    "uniform": Kernel(
        "uniform", 1.0, _poly_pdf(_UNIFORM_PIECES), _uniform_cdf,
        _UNIFORM_PIECES, sq_integral=0.5, gamma=-1.0 / 3.0,
    ),
    "epanechnikov": Kernel(
        "epanechnikov", 1.0, _poly_pdf(_EPAN_PIECES), _epanechnikov_cdf,
        _EPAN_PIECES, sq_integral=0.6, gamma=-33.0 / 140.0,
    ),
    "triangular": Kernel(
        "triangular", 1.0, _poly_pdf(_TRI_PIECES), _triangular_cdf,
        _TRI_PIECES, sq_integral=2.0 / 3.0, gamma=-0.2,
    ),
    "quartic": Kernel(
        "quartic", 1.0, _poly_pdf(_QUARTIC_PIECES), _quartic_cdf,
        _QUARTIC_PIECES, sq_integral=5.0 / 7.0, gamma=-355.0 / 1848.0,
    ),
}


def get_kernel(name: str) -> Kernel:
    """Look up a built-in kernel by name."""
    try:
        return KERNELS[name]
    except KeyError:
        raise ParameterError(
            f"unknown kernel {name!r}; choose from {sorted(KERNELS)}"
        ) from None


def load_kernel_table(path) -> Kernel:
    """Build a custom kernel from a two-column (u, f(u)) text file.

    The tabulated density is linearly interpolated, validated for symmetry
    and unit mass, and renormalized so that the interpolant integrates to
    exactly one.  The support half-width b is the largest |u| in the table.
    """
    table = np.loadtxt(path, dtype=float, ndmin=2)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 3:
        raise ParameterError(f"kernel table {path}: expected >=3 rows of 'u f(u)'")
    order = np.argsort(table[:, 0])
    us, fs = table[order, 0], table[order, 1]
    if np.any(fs < 0):
        raise ParameterError(f"kernel table {path}: negative density values")
    b = float(max(abs(us[0]), abs(us[-1])))
    if b <= 0:
        raise ParameterError(f"kernel table {path}: support collapses to a point")

    probe = np.linspace(-b, b, 1001)
    left = np.interp(probe, us, fs, left=0.0, right=0.0)
    right = np.interp(-probe, us, fs, left=0.0, right=0.0)
    scale = max(fs.max(), 1e-300)
    if np.max(np.abs(left - right)) > 1e-8 * scale:
        raise ParameterError(f"kernel table {path}: density is not symmetric")

    mass = float(np.trapezoid(fs, us))
    if abs(mass - 1.0) > 1e-6:
        raise ParameterError(
            f"kernel table {path}: density integrates to {mass:.8f}, not 1"
        )
    fs = fs / mass  # exact unit mass for the trapezoid interpolant

    # CDF of the piecewise-linear interpolant is piecewise quadratic.
    df = np.diff(fs)
    du = np.diff(us)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (fs[1:] + fs[:-1]) * du)])

    def pdf(u):
        return np.interp(np.asarray(u, dtype=float), us, fs, left=0.0, right=0.0)

    def cdf(u):
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(us, u, side="right") - 1, 0, len(us) - 2)
        x = np.clip(u, us[0], us[-1]) - us[k]
        val = cum[k] + fs[k] * x + 0.5 * df[k] / du[k] * x * x
        return np.clip(np.where(u < us[0], 0.0, np.where(u > us[-1], 1.0, val)), 0.0, 1.0)

    return Kernel(name="custom", b=b, pdf=pdf, cdf=cdf)


def eval_scaled(kernel: Kernel, t, s, h: float):
    """Scaled kernel weight f((s - t)/h)/h; zero outside |s - t| <= b h."""
    if h <= 0:
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h}")
    return kernel.pdf((np.asarray(s, dtype=float) - t) / h) / h


def _gl_nodes(n: int):
    nodes, weights = legendre.leggauss(n)
    return nodes, weights


def _gl_integrate(func, lo: float, hi: float, n: int) -> float:
    if hi <= lo:
        return 0.0
    nodes, weights = _gl_nodes(n)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return float(half * np.sum(weights * func(mid + half * nodes)))


def _piece_edges(kernel: Kernel) -> np.ndarray:
    edges = {-kernel.b, kernel.b}
    if kernel.pieces is not None:
        for lo, hi, _ in kernel.pieces:
            edges.update((lo, hi))
    return np.array(sorted(edges))


def squared_integral(kernel: Kernel) -> float:
    """Integral of f^2 over the support (closed form when available)."""
    if kernel.sq_integral is not None:
        return kernel.sq_integral
    if kernel.pieces is not None:
        return sum(
            _gl_integrate(lambda u: kernel.pdf(u) ** 2, lo, hi, 16)
            for lo, hi, _ in kernel.pieces
        )
    val, _ = integrate.quad(
        lambda u: float(kernel.pdf(u)) ** 2, -kernel.b, kernel.b,
        epsabs=1e-12, limit=200,
    )
    return val


def _mean_abs(kernel: Kernel) -> float:
    # E|r| = 2 int_0^b r f(r) dr by symmetry
    if kernel.pieces is not None:
        edges = _piece_edges(kernel)
        edges = np.unique(np.concatenate([edges[edges >= 0], [0.0]]))
        return 2.0 * sum(
            _gl_integrate(lambda u: u * kernel.pdf(u), lo, hi, 16)
            for lo, hi in zip(edges[:-1], edges[1:])
        )
    val, _ = integrate.quad(
        lambda u: u * float(kernel.pdf(u)), 0.0, kernel.b, epsabs=1e-12, limit=200
    )
    return 2.0 * val


def _mean_abs_diff(kernel: Kernel) -> float:
    # E|r1 - r2| = 2 int F (1 - F); exact for polynomial F with GL nodes
    if kernel.cdf is None:
        raise ParameterError(f"kernel {kernel.name!r} has no CDF; cannot form gamma_f")
    F = kernel.cdf
    if kernel.pieces is not None:
        edges = _piece_edges(kernel)
        return 2.0 * sum(
            _gl_integrate(lambda u: F(u) * (1.0 - F(u)), lo, hi, 16)
            for lo, hi in zip(edges[:-1], edges[1:])
        )
    val, _ = integrate.quad(
        lambda u: float(F(u)) * (1.0 - float(F(u))), -kernel.b, kernel.b,
        epsabs=1e-12, limit=400,
    )
    return 2.0 * val


def gamma_f(kernel: Kernel) -> float:
    """Bias constant E|r1 - r2| - 2 E|r|; strictly negative for a density."""
    if kernel.gamma is not None:
        return kernel.gamma
    return _mean_abs_diff(kernel) - 2.0 * _mean_abs(kernel)


def _autoconv_breaks(kernel: Kernel, x: float) -> np.ndarray:
    """Integration breakpoints of r -> f(r + x) f(r) within the overlap."""
    b = kernel.b
    lo, hi = max(-b, -b - x), min(b, b - x)
    edges = _piece_edges(kernel)
    pts = np.concatenate([edges, edges - x])
    pts = pts[(pts > lo) & (pts < hi)]
    return np.unique(np.concatenate([[lo], pts, [hi]]))


def autoconvolution(kernel: Kernel, x: float) -> float:
    """Self-overlap integral of f(r + x) f(r) dr; zero for |x| >= 2b."""
    x = abs(float(x))
    if x >= 2.0 * kernel.b:
        return 0.0
    breaks = _autoconv_breaks(kernel, x)
    func = lambda r: kernel.pdf(r + x) * kernel.pdf(r)
    if kernel.pieces is not None:
        return sum(
            _gl_integrate(func, lo, hi, 16) for lo, hi in zip(breaks[:-1], breaks[1:])
        )
    val, _ = integrate.quad(
        lambda r: float(kernel.pdf(r + x)) * float(kernel.pdf(r)),
        breaks[0], breaks[-1], points=breaks[1:-1].tolist(), epsabs=1e-12, limit=400,
    )
    return val


def abs_moment_integral(kernel: Kernel, t: float, h: float) -> float:
    """E|t + (r1 - r2) h| for r1, r2 ~ f; equals t exactly once t >= 2bh.

    This is the regressor paired with small-lag ACF values when estimating
    the right derivative of the ACF at zero.
    """
    if h <= 0:
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h}")
    if t < 0:
        raise ParameterError(f"lag must be nonnegative, got {t}")
    two_b = 2.0 * kernel.b
    if t >= two_b * h:
        return float(t)
    # Integrate |t + h d| against the density of d = r1 - r2 (the kernel's
    # autoconvolution), splitting at the kink d = -t/h.
    kink = -t / h
    edges = _piece_edges(kernel)
    diffs = np.subtract.outer(edges, edges).ravel()
    pts = np.unique(np.concatenate([diffs, [kink, -two_b, two_b]]))
    pts = pts[(pts >= -two_b) & (pts <= two_b)]

    def integrand(d):
        d = np.asarray(d, dtype=float)
        return np.abs(t + h * d) * np.array([autoconvolution(kernel, di) for di in d])

    if kernel.pieces is not None:
        return sum(
            _gl_integrate(integrand, lo, hi, 16) for lo, hi in zip(pts[:-1], pts[1:])
        )
    val, _ = integrate.quad(
        lambda d: abs(t + h * d) * autoconvolution(kernel, d),
        -two_b, two_b, points=pts[1:-1].tolist(), epsabs=1e-10, limit=400,
    )
    return val


def validate_kernel(kernel: Kernel, n_grid: int = 1000) -> None:
    """Check symmetry, support and unit mass; raise ParameterError on failure."""
    b = kernel.b
    u = np.linspace(-b, b, n_grid)
    f = kernel.pdf(u)
    if np.any(f < 0):
        raise ParameterError(f"kernel {kernel.name!r}: negative density")
    if np.max(np.abs(f - kernel.pdf(-u))) > 1e-10 * max(f.max(), 1.0):
        raise ParameterError(f"kernel {kernel.name!r}: density is not symmetric")
    outside = np.array([1.5 * b, 2.0 * b, -1.5 * b])
    if np.any(kernel.pdf(outside) != 0.0):
        raise ParameterError(f"kernel {kernel.name!r}: support exceeds [-b, b]")
    if kernel.pieces is not None:
        mass = sum(
            _gl_integrate(kernel.pdf, lo, hi, 32) for lo, hi, _ in kernel.pieces
        )
    else:
        mass, _ = integrate.quad(
            lambda x: float(kernel.pdf(x)), -b, b, epsabs=1e-12, limit=400
        )
    if abs(mass - 1.0) > _MASS_TOL:
        raise ParameterError(
            f"kernel {kernel.name!r}: mass {mass!r} differs from 1 beyond {_MASS_TOL}"
        )
