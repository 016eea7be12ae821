import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate

from coxkernel import kernels
from coxkernel.errors import InvalidBandwidthError, ParameterError

ALL = ["uniform", "epanechnikov", "triangular", "quartic"]

# closed forms derived by hand from the four densities
SQ_INTEGRAL = {
    "uniform": 0.5,
    "epanechnikov": 0.6,
    "triangular": 2.0 / 3.0,
    "quartic": 5.0 / 7.0,
}
GAMMA = {
    "uniform": -1.0 / 3.0,
    "epanechnikov": -33.0 / 140.0,
    "triangular": -0.2,
    "quartic": -355.0 / 1848.0,
}
MEAN_ABS_DIFF = {
    "uniform": 2.0 / 3.0,
    "epanechnikov": 18.0 / 35.0,
    "triangular": 7.0 / 15.0,
    "quartic": 100.0 / 231.0,
}
# exact autoconvolution values (symbolic integration of the densities)
AUTOCONV = {
    "uniform": {0.0: 0.5, 0.25: 7 / 16, 0.5: 3 / 8, 1.0: 0.25, 1.5: 1 / 8, 2.0: 0.0},
    "epanechnikov": {0.0: 0.6, 0.25: 91581 / 163840, 0.5: 2349 / 5120,
                     1.0: 33 / 160, 1.5: 183 / 5120, 2.0: 0.0},
    "triangular": {0.0: 2 / 3, 0.25: 235 / 384, 0.5: 23 / 48,
                   1.0: 1 / 6, 1.5: 1 / 48, 2.0: 0.0},
    "quartic": {0.0: 5 / 7, 0.25: 87312365 / 134217728, 0.5: 900315 / 1835008,
                1.0: 515 / 3584, 1.5: 15665 / 1835008, 2.0: 0.0},
}
# high-precision quadrature of |t + (r - m) h| f(r) f(m) over the square
ABS_MOMENT = {
    ("uniform", 0.3, 0.5): 1243 / 3000,
    ("epanechnikov", 0.05, 0.064): 0.054059894795968064,
    ("triangular", 0.1, 0.2): 0.12489583333333333,
    ("quartic", 0.01, 0.012): 0.010292328201033915,
}


@pytest.mark.parametrize("name", ALL)
def test_mass_symmetry_support(name):
    k = kernels.get_kernel(name)
    kernels.validate_kernel(k)
    u = np.linspace(-k.b, k.b, 1000)
    assert np.all(k.pdf(u) >= 0)
    np.testing.assert_allclose(k.pdf(u), k.pdf(-u), atol=1e-14)
    assert np.all(k.pdf(np.array([1.01 * k.b, 2 * k.b, -3 * k.b])) == 0.0)
    mass, _ = integrate.quad(lambda x: float(k.pdf(x)), -k.b, k.b, limit=200)
    assert abs(mass - 1.0) < 1e-10


@pytest.mark.parametrize("name", ALL)
def test_cdf_matches_pdf(name):
    k = kernels.get_kernel(name)
    u = np.linspace(-k.b, k.b, 57)
    expected = [integrate.quad(lambda x: float(k.pdf(x)), -k.b, ui, limit=100)[0] for ui in u]
    np.testing.assert_allclose(k.cdf(u), expected, atol=1e-9)
    assert k.cdf(-2 * k.b) == 0.0 and k.cdf(2 * k.b) == 1.0


def test_eval_scaled_values(epan):
    uni = kernels.get_kernel("uniform")
    assert kernels.eval_scaled(uni, 0.0, 0.0, 1.0) == 0.5
    assert kernels.eval_scaled(epan, 0.0, 0.5, 1.0) == pytest.approx(0.5625, abs=1e-15)
    # outside the scaled support
    for name in ALL:
        k = kernels.get_kernel(name)
        assert kernels.eval_scaled(k, 1.0, 1.0 + 2 * k.b * 0.3, 0.3) == 0.0
    with pytest.raises(InvalidBandwidthError):
        kernels.eval_scaled(uni, 0.0, 0.0, 0.0)
    with pytest.raises(InvalidBandwidthError):
        kernels.eval_scaled(uni, 0.0, 0.0, -1.0)


@pytest.mark.parametrize("name", ALL)
def test_eval_scaled_mass(name):
    # integrates to one over s for fixed t and h
    k = kernels.get_kernel(name)
    for t, h in [(3.0, 0.5), (-1.0, 2.0), (10.0, 0.01)]:
        val, _ = integrate.quad(
            lambda s: float(kernels.eval_scaled(k, t, s, h)),
            t - k.b * h, t + k.b * h, limit=200,
        )
        assert abs(val - 1.0) < 1e-8


@pytest.mark.parametrize("name", ALL)
def test_squared_integral(name):
    k = kernels.get_kernel(name)
    assert kernels.squared_integral(k) == pytest.approx(SQ_INTEGRAL[name], abs=1e-12)
    # quadrature fallback (no cached constant) agrees
    bare = dataclasses.replace(k, sq_integral=None)
    assert kernels.squared_integral(bare) == pytest.approx(SQ_INTEGRAL[name], abs=1e-10)


@pytest.mark.parametrize("name", ALL)
def test_gamma_f(name):
    k = kernels.get_kernel(name)
    assert kernels.gamma_f(k) == pytest.approx(GAMMA[name], abs=1e-12)
    assert kernels.gamma_f(k) < 0
    bare = dataclasses.replace(k, gamma=None)
    assert kernels.gamma_f(bare) == pytest.approx(GAMMA[name], abs=1e-10)


def test_gamma_f_double_integral_oracle(epan):
    # independent route: direct double integral of |r1 - r2| f f
    inner = lambda r2: integrate.quad(
        lambda r1: float(epan.pdf(r1)) * abs(r1 - r2), -1, 1, points=[r2], limit=100
    )[0]
    ediff, _ = integrate.quad(lambda r2: float(epan.pdf(r2)) * inner(r2), -1, 1, limit=100)
    assert ediff == pytest.approx(MEAN_ABS_DIFF["epanechnikov"], abs=1e-9)


@pytest.mark.parametrize("name", ALL)
def test_autoconvolution_closed_forms(name):
    k = kernels.get_kernel(name)
    for x, expected in AUTOCONV[name].items():
        assert kernels.autoconvolution(k, x) == pytest.approx(expected, abs=1e-9)
        assert kernels.autoconvolution(k, -x) == pytest.approx(expected, abs=1e-9)
    assert kernels.autoconvolution(k, 2.0 * k.b) == 0.0
    assert kernels.autoconvolution(k, 5.0) == 0.0
    assert kernels.autoconvolution(k, 0.0) == pytest.approx(
        kernels.squared_integral(k), abs=1e-12
    )


@pytest.mark.parametrize("name", ALL)
def test_abs_moment_identity_beyond_support(name):
    # E|t + (r1 - r2) h| = t exactly once t >= 2bh
    k = kernels.get_kernel(name)
    rng = np.random.default_rng(7)
    for _ in range(20):
        h = float(rng.uniform(0.01, 2.0))
        t = float(2.0 * k.b * h * rng.uniform(1.0, 4.0))
        assert kernels.abs_moment_integral(k, t, h) == t
    assert kernels.abs_moment_integral(k, 3.0 * k.b * 0.5, 0.5) == 1.5 * k.b


@pytest.mark.parametrize("name", ALL)
def test_abs_moment_at_zero_lag(name):
    k = kernels.get_kernel(name)
    for h in (0.25, 1.0, 0.064):
        expected = h * MEAN_ABS_DIFF[name]
        assert kernels.abs_moment_integral(k, 0.0, h) == pytest.approx(expected, abs=1e-10)


def test_abs_moment_frozen_oracle():
    for (name, t, h), expected in ABS_MOMENT.items():
        k = kernels.get_kernel(name)
        assert kernels.abs_moment_integral(k, t, h) == pytest.approx(expected, abs=1e-9)


def test_abs_moment_errors(epan):
    with pytest.raises(InvalidBandwidthError):
        kernels.abs_moment_integral(epan, 0.1, 0.0)
    with pytest.raises(ParameterError):
        kernels.abs_moment_integral(epan, -0.1, 1.0)


def test_get_kernel_unknown():
    with pytest.raises(ParameterError):
        kernels.get_kernel("gaussian")


def test_custom_kernel_table(tmp_path):
    # tabulated triangular density is exact under linear interpolation
    u = np.linspace(-1, 1, 2001)
    f = np.maximum(0.0, 1.0 - np.abs(u))
    table = tmp_path / "tri.txt"
    np.savetxt(table, np.column_stack([u, f]))
    k = kernels.load_kernel_table(table)
    assert k.b == 1.0
    assert kernels.squared_integral(k) == pytest.approx(2.0 / 3.0, abs=1e-8)
    assert kernels.gamma_f(k) == pytest.approx(-0.2, abs=1e-8)
    assert kernels.autoconvolution(k, 0.5) == pytest.approx(23.0 / 48.0, abs=1e-7)
    assert kernels.abs_moment_integral(k, 0.1, 0.2) == pytest.approx(
        ABS_MOMENT[("triangular", 0.1, 0.2)], abs=1e-6
    )


def test_custom_kernel_rejects_bad_tables(tmp_path):
    u = np.linspace(-1, 1, 101)
    asym = np.where(u < 0, 1.0 + u, 1.2 * (1.0 - u))
    bad = tmp_path / "bad.txt"
    np.savetxt(bad, np.column_stack([u, np.maximum(asym, 0)]))
    with pytest.raises(ParameterError):
        kernels.load_kernel_table(bad)

    unnormalized = tmp_path / "unnorm.txt"
    np.savetxt(unnormalized, np.column_stack([u, 2.0 * np.maximum(0, 1 - np.abs(u))]))
    with pytest.raises(ParameterError):
        kernels.load_kernel_table(unnormalized)

    negative = tmp_path / "neg.txt"
    np.savetxt(negative, np.column_stack([u, np.cos(3 * u)]))
    with pytest.raises(ParameterError):
        kernels.load_kernel_table(negative)
