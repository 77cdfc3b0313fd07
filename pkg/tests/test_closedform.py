import numpy as np
import pytest
from scipy import integrate

from sgkink import closedform as cf
from sgkink.grid import SpectralField, fourier, make_grid

SQRT_HALF_PI = np.sqrt(np.pi / 2)


@pytest.fixture(scope="module")
def g():
    return make_grid(4096, 40.0 * np.pi)


def test_sech_hat_values():
    assert cf.sech_hat(0.0) == pytest.approx(SQRT_HALF_PI, rel=1e-15)
    assert cf.sech2_hat(0.0) == pytest.approx(SQRT_HALF_PI * 2 / np.pi, rel=1e-15)


@pytest.mark.parametrize("name,fn,sym", [
    ("sech", lambda x: 1 / np.cosh(x), cf.sech_hat),
    ("sech2", lambda x: 1 / np.cosh(x) ** 2, cf.sech2_hat),
    ("sech3", lambda x: 1 / np.cosh(x) ** 3, cf.sech3_hat),
    ("sech5", lambda x: 1 / np.cosh(x) ** 5, cf.sech5_hat),
    ("alpha1", cf.alpha1, cf.alpha1_hat),
    ("alpha2", cf.alpha2, cf.alpha2_hat),
    ("alpha3", cf.alpha3, cf.alpha3_hat),
])
def test_symbols_match_fft(g, name, fn, sym):
    err = np.max(np.abs(fourier(fn(g.x), g) - sym(g.frequencies)))
    assert err < 1e-10, name


@pytest.mark.parametrize("xi", [0.0, 0.4, 1.3, 2.7])
def test_sech_hat_against_quadrature(xi):
    # independent oracle: direct cosine integral of sech
    ref = integrate.quad(lambda x: np.cos(x * xi) / np.cosh(x), 0, 60, limit=400)[0]
    assert cf.sech_hat(xi) == pytest.approx(2 * ref / np.sqrt(2 * np.pi), abs=1e-12)


@pytest.mark.parametrize("xi", [0.3, 1.0, 2.2])
def test_tanh_pv_transform_against_quadrature(xi):
    # tanh = sign + (tanh - sign); the first piece contributes -i sqrt(2/pi)/xi
    corr = integrate.quad(lambda x: np.tanh(x) - 1.0, 0, 60, weight="sin", wvar=xi)[0]
    ref = -1j * np.sqrt(2 / np.pi) * (1 / xi + corr)
    assert abs(cf.tanh_hat_pv(xi) - ref) < 1e-10


def test_tanh_pv_undefined_at_zero():
    with pytest.raises(ValueError):
        cf.tanh_hat_pv(0.0)


def test_nonresonance():
    s3 = np.sqrt(3.0)
    assert abs(cf.alpha1_hat(s3)) < 1e-15
    assert abs(cf.alpha1_hat(-s3)) < 1e-15


def test_nonresonance_fft(g):
    reps = cf.nonresonance_reports(g)
    assert all(r.passed for r in reps)
    assert reps[0].residual_sup < 1e-9


def test_alpha1_hat_at_zero(g):
    val = cf.dft_at(cf.alpha1(g.x), g, [0.0])[0]
    assert cf.alpha1_hat(0.0) == pytest.approx(0.375 * SQRT_HALF_PI, rel=1e-12)
    assert abs(val - 0.375 * SQRT_HALF_PI) < 1e-9


def test_alpha1_hat_sign_pattern():
    xi = np.linspace(-6, 6, 4001)
    a = cf.alpha1_hat(xi)
    inner = np.abs(xi) < np.sqrt(3) - 1e-3
    outer = np.abs(xi) > np.sqrt(3) + 1e-3
    assert np.all(a[inner] > 0)
    assert np.all(a[outer] < 0)


def test_normal_form_symbols_smooth_across_resonance():
    s3 = np.sqrt(3.0)
    a11, a12, a13 = cf.normal_form_symbols(np.array([s3]))
    assert abs(a12[0]) < 1e-15
    xi = s3 + np.linspace(-1e-2, 1e-2, 2001)
    v = cf.normal_form_symbols(xi)[0]
    assert np.all(np.isfinite(v))
    # smooth: second differences are tiny and regular
    assert np.max(np.abs(np.diff(v, 2))) < 1e-8


def test_normal_form_one_sided_limits():
    reps = cf.normal_form_reports()
    assert reps[0].residual_sup < 1e-8


def test_convolution_identities():
    reps = {r.name: r for r in cf.convolution_identities()}
    for name, r in reps.items():
        assert r.passed, (name, r.residual_sup)
    lo, hi = 1.8, 2.2
    slope = reps["pv_exclusion_slope"].residual_sup
    assert lo <= slope <= hi


def test_sech_conv_sech_at_zero():
    assert cf.sech_conv_sech_at_zero() == pytest.approx(4 / np.pi, abs=1e-12)


def test_pv_values():
    assert abs(cf.pv_cosech(cf.Sech, np.array([0.0]))[0]) < 1e-14
    assert cf.pv_cosech(cf.Sech, np.array([1.0]))[0] == pytest.approx(
        2 / np.cosh(np.pi / 2), abs=1e-8)


def test_I_hat_on_sech(g):
    assert cf.I_hat_report(g).residual_sup < 1e-7


def test_I_hat_on_random_even_field(g):
    from sgkink.transforms import I_values, random_bandlimited

    f = random_bandlimited(g, np.random.default_rng(8), "even")
    got = cf.I_hat(SpectralField(g, fourier(f, g))).coefficients
    ref = fourier(I_values(f, g), g)
    assert np.max(np.abs(got - ref)) < 1e-9


def test_I_hat_of_zero(g):
    z = SpectralField(g, np.zeros(g.n_points))
    assert np.max(np.abs(cf.I_hat(z).coefficients)) == 0.0


def test_coefficient_fields(g):
    cs = cf.coefficient_set(g)
    assert np.max(np.abs(cs.alpha1.values - cf.alpha1(g.x))) < 1e-15
    assert cs.alpha11.values.shape == (g.n_points,)
