import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgkink.closedform import sech_hat, sech2_hat
from sgkink.grid import (
    RealField,
    SpectralField,
    apply_multiplier,
    derivative,
    derivative_values,
    field_from_function,
    fourier,
    inverse_fourier,
    japanese,
    make_grid,
    parity_defect,
    parity_project,
    to_physical,
    to_spectral,
)


def test_lattice_geometry(grid1024):
    g = grid1024
    assert g.x[g.origin] == 0.0
    assert g.dx == pytest.approx(2 * g.half_length / g.n_points)
    assert g.dxi == pytest.approx(np.pi / g.half_length)
    assert g.frequencies[g.nyquist] == pytest.approx(-g.n_points / 2 * g.dxi)
    assert np.max(np.abs(g.x[g.mirror][1:] + g.x[1:])) < 1e-12


@pytest.mark.parametrize("n", [15, 17, 22, 0, 2.5, True])
def test_bad_point_counts(n):
    with pytest.raises(ValueError):
        make_grid(n, 10.0)


@pytest.mark.parametrize("length", [0.0, -1.0, np.inf, np.nan])
def test_bad_lengths(length):
    with pytest.raises(ValueError):
        make_grid(64, length)


def test_japanese_bracket():
    assert japanese(0.0) == 1.0
    assert japanese(np.sqrt(3.0)) == pytest.approx(2.0)


def test_sech_transform_matches_closed_form(grid4096):
    g = grid4096
    err = np.max(np.abs(fourier(1 / np.cosh(g.x), g) - sech_hat(g.frequencies)))
    assert err < 1e-12
    err2 = np.max(np.abs(fourier(1 / np.cosh(g.x) ** 2, g) - sech2_hat(g.frequencies)))
    assert err2 < 1e-12


def test_gaussian_transform(grid1024):
    # exp(-x^2/2) is its own unitary transform
    g = grid1024
    err = np.max(np.abs(fourier(np.exp(-g.x**2 / 2), g) - np.exp(-g.frequencies**2 / 2)))
    assert err < 1e-13


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_fourier_round_trip(seed):
    g = make_grid(128, 7.0)
    a = np.random.default_rng(seed).normal(size=128)
    assert np.max(np.abs(inverse_fourier(fourier(a, g), g) - a)) < 1e-12


def test_parity_tags(grid1024):
    g = grid1024
    odd = field_from_function(g, lambda x: x * np.exp(-x**2), "odd")
    assert parity_defect(odd.values, g, "odd") < 1e-15
    with pytest.raises(ValueError):
        RealField(g, np.exp(-(g.x - 1) ** 2), "odd")
    with pytest.raises(ValueError):
        RealField(g, np.zeros(5))
    with pytest.raises(ValueError):
        SpectralField(g, np.zeros(5))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.sampled_from(["odd", "even"]))
def test_parity_projection_idempotent(seed, parity):
    g = make_grid(64, 5.0)
    f = RealField(g, np.random.default_rng(seed).normal(size=64))
    p = parity_project(f, parity)
    assert parity_defect(p.values, g, parity) == 0.0
    assert np.max(np.abs(parity_project(p, parity).values - p.values)) < 1e-15


def test_derivative_of_gaussian(grid1024):
    g = grid1024
    f = np.exp(-g.x**2)
    assert np.max(np.abs(derivative_values(f, g) + 2 * g.x * f)) < 1e-12
    d = derivative(RealField(g, f, "even"))
    assert d.parity == "odd"


def test_multiplier_and_spectral_round_trip(grid1024):
    g = grid1024
    f = field_from_function(g, lambda x: np.exp(-x**2))
    s = to_spectral(f)
    back = to_physical(s)
    assert np.max(np.abs(back.values - f.values)) < 1e-14
    m = apply_multiplier(s, lambda xi: 1j * xi)
    assert m.coefficients[g.nyquist] == 0
    with np.errstate(divide="ignore"), pytest.raises(ValueError):
        apply_multiplier(s, lambda xi: 1 / xi)


def test_dealias_mask(grid1024):
    g = grid1024
    m = g.dealias_mask()
    assert not m[g.nyquist]
    assert m.sum() == pytest.approx(2 / 3 * g.n_points, abs=3)
    with pytest.raises(ValueError):
        g.dealias_mask(0.0)
