"""Closed-form Fourier data around the kink and quadrature oracles for them.

Convolutions are unnormalized, (f * g)(xi) = int f(xi - eta) g(eta) d eta, and
Sech(xi) = sech(pi xi / 2), Cosech(xi) = cosech(pi xi / 2).

Principal-value integrals against Cosech are evaluated by pairing the points
eta = xi -+ s, which turns the 1/s singularity into a bounded even integrand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .grid import Grid, RealField, SpectralField, fourier, inverse_fourier, japanese
from .transforms import OperatorReport

SQRT_HALF_PI = np.sqrt(np.pi / 2.0)
SQRT3 = np.sqrt(3.0)


# ------------------------------------------------------------ elementary symbols

def _sech(z):
    z = np.asarray(z, dtype=float)
    # 1/cosh without overflow for large arguments
    a = np.exp(-np.abs(z))
    return 2.0 * a / (1.0 + a * a)


def _cosech(z):
    z = np.asarray(z, dtype=float)
    a = np.exp(-np.abs(z))
    with np.errstate(divide="ignore"):
        return np.sign(z) * 2.0 * a / (1.0 - a * a)


def _x_over_sinh(z):
    """z / sinh(z), equal to 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    big = np.abs(z) > 1e-4
    out[big] = z[big] * _cosech(z[big])
    small = ~big
    out[small] = 1.0 - z[small] ** 2 / 6.0 + 7.0 * z[small] ** 4 / 360.0
    return out


def Sech(xi):
    return _sech(0.5 * np.pi * np.asarray(xi, dtype=float))


def Cosech(xi):
    return _cosech(0.5 * np.pi * np.asarray(xi, dtype=float))


def sech_hat(xi):
    return SQRT_HALF_PI * Sech(xi)


def sech2_hat(xi):
    """sqrt(pi/2) xi / sinh(pi xi / 2), continued by sqrt(pi/2) 2/pi at 0."""
    xi = np.asarray(xi, dtype=float)
    return SQRT_HALF_PI * (2.0 / np.pi) * _x_over_sinh(0.5 * np.pi * xi)


def sech3_hat(xi):
    xi = np.asarray(xi, dtype=float)
    return 0.5 * (1.0 + xi**2) * sech_hat(xi)


def sech5_hat(xi):
    xi = np.asarray(xi, dtype=float)
    return (1.0 + xi**2) * (9.0 + xi**2) / 24.0 * sech_hat(xi)


def tanh_hat_pv(xi):
    """Density -i sqrt(pi/2) cosech(pi xi / 2) of the transform of tanh away from 0."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi == 0.0):
        raise ValueError("tanh_hat_pv is a principal-value density; xi = 0 is singular")
    return -1j * SQRT_HALF_PI * Cosech(xi)


# ------------------------------------------------------------ alpha coefficients

def alpha1(x):
    s, t = 1.0 / np.cosh(x), np.tanh(x)
    return 3.0 * s**3 * t**2


def alpha2(x):
    s, t = 1.0 / np.cosh(x), np.tanh(x)
    return (2.0 * s - 6.0 * s**3) * t


def alpha3(x):
    s = 1.0 / np.cosh(x)
    return -2.0 * s + 3.0 * s**3


def alpha1_hat(xi):
    """-(1/8) sqrt(pi/2) (xi^2 - 3)(xi^2 + 1) sech(pi xi / 2); zero at +-sqrt(3)."""
    xi = np.asarray(xi, dtype=float)
    return -0.125 * SQRT_HALF_PI * (xi**2 - 3.0) * (xi**2 + 1.0) * Sech(xi)


def alpha2_hat(xi):
    """alpha2 = 2 (sech^3)' - 2 sech', hence i xi (xi^2 - 1) sqrt(pi/2) Sech."""
    xi = np.asarray(xi, dtype=float)
    return 1j * xi * (xi**2 - 1.0) * sech_hat(xi)


def alpha3_hat(xi):
    xi = np.asarray(xi, dtype=float)
    return 0.5 * (3.0 * xi**2 - 1.0) * sech_hat(xi)


def normal_form_symbols(xi):
    """(alpha11^, alpha12^, alpha13^) with the sqrt(3) quotient cancelled analytically."""
    xi = np.asarray(xi, dtype=float)
    jb = japanese(xi)
    # (2 - <xi>)^{-1} alpha1^ = (1/8) sqrt(pi/2) (2 + <xi>)(xi^2 + 1) Sech
    quotient = 0.125 * SQRT_HALF_PI * (2.0 + jb) * (xi**2 + 1.0) * Sech(xi)
    a1 = alpha1_hat(xi)
    a11 = 0.5 / jb * quotient
    a12 = -a1 / jb**2
    a13 = -0.5 / (jb * (2.0 + jb)) * a1
    return a11, a12, a13


def alpha11_uncancelled(xi):
    """Raw quotient 1/2 <xi>^{-1} (2 - <xi>)^{-1} alpha1^; singular in floating point at sqrt(3)."""
    xi = np.asarray(xi, dtype=float)
    jb = japanese(xi)
    return 0.5 / (jb * (2.0 - jb)) * alpha1_hat(xi)


@dataclass(frozen=True)
class CoefficientSet:
    alpha1: RealField
    alpha2: RealField
    alpha3: RealField
    alpha11: RealField
    alpha12: RealField
    alpha13: RealField
    symbols: dict


def _field_from_symbol(symbol_values: np.ndarray, grid: Grid) -> RealField:
    vals = inverse_fourier(symbol_values, grid)
    return RealField(grid, vals.real, "even", check=False)


@lru_cache(maxsize=8)
def coefficient_set(grid: Grid) -> CoefficientSet:
    x = grid.x
    xi = grid.frequencies
    a11, a12, a13 = normal_form_symbols(xi)
    return CoefficientSet(
        alpha1=RealField(grid, alpha1(x), "even", check=False),
        alpha2=RealField(grid, alpha2(x), "odd", check=False),
        alpha3=RealField(grid, alpha3(x), "even", check=False),
        alpha11=_field_from_symbol(a11, grid),
        alpha12=_field_from_symbol(a12, grid),
        alpha13=_field_from_symbol(a13, grid),
        symbols={
            "alpha1": alpha1_hat, "alpha2": alpha2_hat, "alpha3": alpha3_hat,
            "alpha11": lambda q: normal_form_symbols(q)[0],
            "alpha12": lambda q: normal_form_symbols(q)[1],
            "alpha13": lambda q: normal_form_symbols(q)[2],
        },
    )


def dft_at(values: np.ndarray, grid: Grid, xi) -> np.ndarray:
    """Rectangle-rule transform of lattice samples at arbitrary frequencies."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    phase = np.exp(-1j * np.outer(xi, grid.x))
    return (grid.dx / np.sqrt(2.0 * np.pi)) * (phase @ values)


# ------------------------------------------------------------ PV quadrature

#: half-width of the midpoint core and the extent of the Gauss-Legendre tail
PV_CORE = 1.0
PV_TAIL = 40.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _tail_nodes(start: float, stop: float, panel: float = 1.0):
    edges = np.arange(start, stop + 0.5 * panel, panel)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    s = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return s, w


def pv_cosech_raw(h: Callable[[np.ndarray], np.ndarray], xi, s0: float) -> np.ndarray:
    """PV int Cosech(xi - eta) h(eta) d eta with exclusion radius s0.

    The paired integrand (h(xi - s) - h(xi + s)) Cosech(s) is integrated by the
    midpoint rule on [0, PV_CORE] with step 2 s0 (the first node sits at s0,
    so no sample lies within s0 of the singularity) and by Gauss-Legendre
    panels on [PV_CORE, PV_TAIL]. The junction leaves an even error expansion
    in s0 that :func:`pv_cosech` removes by extrapolation.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n_core = int(round(PV_CORE / (2.0 * s0)))
    if n_core < 1 or not np.isclose(n_core * 2.0 * s0, PV_CORE):
        raise ValueError("PV_CORE must be an integer multiple of 2*s0")
    s_core = s0 * (2.0 * np.arange(n_core) + 1.0)
    w_core = np.full(n_core, 2.0 * s0)
    s_tail, w_tail = _tail_nodes(PV_CORE, PV_TAIL)
    s = np.concatenate([s_core, s_tail])
    w = np.concatenate([w_core, w_tail]) * Cosech(s)
    rows = [np.dot(w, h(q - s) - h(q + s)) for q in xi]
    return np.array(rows)


def richardson(values: Sequence, ratio: float = 2.0, powers: Sequence[int] = (2, 4, 6)):
    """Eliminate err ~ c_p s^p terms from values computed at s, s/ratio, s/ratio^2, ..."""
    table = [np.asarray(v) for v in values]
    for p in powers[: len(table) - 1]:
        f = ratio**p
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
    return table[-1]


def pv_cosech(h: Callable[[np.ndarray], np.ndarray], xi, s0: float = 1.0 / 80.0,
              levels: int = 4) -> np.ndarray:
    """Richardson-extrapolated :func:`pv_cosech_raw` over s0, s0/2, ..., s0/2^(levels-1)."""
    vals = [pv_cosech_raw(h, xi, s0 / 2**k) for k in range(levels)]
    return richardson(vals)


def pv_convergence_slope(h: Callable[[np.ndarray], np.ndarray], xi: float, reference: float,
                         s0: float = 1.0 / 80.0, levels: int = 4) -> tuple[float, np.ndarray]:
    """Log-log slope of |raw - reference| against s0 (expected 2)."""
    radii = s0 / 2.0 ** np.arange(levels)
    errs = np.array([abs(pv_cosech_raw(h, xi, r)[0] - reference) for r in radii])
    slope = np.polyfit(np.log(radii), np.log(errs), 1)[0]
    return float(slope), errs


# ------------------------------------------------------------ transform of I

def I_hat(g: SpectralField) -> SpectralField:
    """Transform of I[g] from the transform of g, without returning to I in x.

    Sech(xi) B(g^) + (i/2) PV int Cosech(xi - eta) g^(eta) <eta>^{-2} d eta
    + i xi <xi>^{-2} g^(xi).

    The last, local term is the delta contribution left over when the
    regularized kernel sech(pi (xi - eta + i) / 2) is taken to the real axis;
    without it the formula misses the oracle by O(1). For lattice data the PV integral uses the points eta = xi_k +- (m + 1/2) dxi,
    where g^ is obtained by transforming g(x) exp(-i x dxi / 2). This is the
    symmetric midpoint rule with exclusion radius dxi / 2, which is
    exponentially accurate for analytic data.
    """
    grid = g.grid
    xi_sorted, order = grid.sorted_frequencies()
    dxi = grid.dxi
    coeffs = g.coefficients
    jb2 = 1.0 + grid.frequencies**2
    B = -0.5j * np.sum(grid.frequencies / jb2 * coeffs) * dxi

    phys = inverse_fourier(coeffs, grid)
    half = fourier(phys * np.exp(-0.5j * grid.x * dxi), grid)  # at xi_k + dxi/2
    H = (half / (1.0 + (grid.frequencies + 0.5 * dxi) ** 2))[order]
    n = grid.n_points
    # kernel c[k - j] = Cosech((k - j - 1/2) dxi) for k - j in [-(n-1), n-1]
    lags = np.arange(-(n - 1), n)
    kern = Cosech((lags - 0.5) * dxi)
    conv = fftconvolve(H, kern, mode="full")[n - 1: 2 * n - 1]
    pv = 0.5j * dxi * conv
    out = np.empty(n, dtype=complex)
    out[order] = Sech(xi_sorted) * B + pv
    out += 1j * grid.frequencies / jb2 * coeffs
    out[grid.nyquist] = 0.0
    return SpectralField(grid, out)


# ------------------------------------------------------------ oracles

#: integrands handed to the oscillatory oracles decay like exp(-x); beyond
#: this cut-off they are below 1e-19
_QUAD_CUT = 45.0


def _quad_cos_transform(f: Callable[[float], float], xi: float) -> float:
    """sqrt(2/pi) int_0^inf f(x) cos(x xi) dx for even, exponentially decaying f."""
    if xi == 0.0:
        val = integrate.quad(f, 0.0, _QUAD_CUT, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    else:
        val = integrate.quad(f, 0.0, _QUAD_CUT, weight="cos", wvar=xi, limit=400,
                             epsabs=1e-13, epsrel=1e-12)[0]
    return np.sqrt(2.0 / np.pi) * val


def _quad_tanh_transform(xi: float) -> complex:
    """Transform of tanh at xi != 0 via tanh = sign + (tanh - sign).

    The sign part contributes 1/xi in the Abel sense; the remainder decays.
    """
    tail = integrate.quad(lambda x: np.tanh(x) - 1.0, 0.0, _QUAD_CUT, weight="sin", wvar=xi,
                          limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return -1j * np.sqrt(2.0 / np.pi) * (1.0 / xi + tail)


def _quad_pv_sech_cosech(xi: float) -> float:
    """(Sech * PV Cosech)(xi) via a Cauchy-weight quadrature around eta = 0."""
    # Cosech(eta) = g(eta) / eta with g smooth; write Sech(xi - eta) g(eta) / (eta - 0)
    def g(eta):
        return Sech(xi - eta) * (eta * Cosech(eta) if eta != 0.0 else 2.0 / np.pi)

    w = 30.0
    core = integrate.quad(g, -w, w, weight="cauchy", wvar=0.0, limit=400,
                          epsabs=1e-15)[0]
    tails = integrate.quad(lambda e: Sech(xi - e) * Cosech(e), w, np.inf, limit=200)[0]
    tails += integrate.quad(lambda e: Sech(xi - e) * Cosech(e), -np.inf, -w, limit=200)[0]
    return core + tails


def _gaussian_probe(width: float):
    """phi(xi) = exp(-xi^2 / (2 width^2)) and its transform in x."""
    def phi(q):
        return np.exp(-0.5 * (np.asarray(q) / width) ** 2)

    def phi_hat(x):
        return width * np.exp(-0.5 * (width * np.asarray(x)) ** 2)

    return phi, phi_hat


PROBE_WIDTHS = (0.3, 0.6, 1.0, 1.7, 3.0)


def weak_identity4(width: float) -> tuple[float, float]:
    """Pair both sides of the tanh^2 identity with a Gaussian probe."""
    phi, phi_hat = _gaussian_probe(width)
    lhs = 2.0 * integrate.quad(lambda x: np.tanh(x) ** 2 * phi_hat(x), 0.0, np.inf,
                               limit=400, epsabs=1e-14)[0]
    rhs = np.sqrt(2.0 * np.pi) * phi(0.0) - 2.0 * integrate.quad(
        lambda q: sech2_hat(np.array([q]))[0] * phi(q), 0.0, np.inf, limit=400,
        epsabs=1e-14)[0]
    return float(lhs), float(rhs)


def weak_identity5(width: float, s0: float = 1.0 / 80.0) -> tuple[float, float]:
    """<PVCosech * PVCosech, phi> by nested PV quadrature versus -4 phi(0) + <2 xi/sinh, phi>."""
    phi, _ = _gaussian_probe(width)

    def inner(eta):
        return pv_cosech(phi, eta, s0)

    # <A * A, phi> = int A(eta) (A~ * phi)(eta) = -PV int Cosech(eta) (A * phi)(eta) d eta
    # = -PV int Cosech(0 - eta) (-1) inner(eta) d eta
    lhs = float(pv_cosech(inner, np.array([0.0]), s0)[0])
    rhs = -4.0 * phi(0.0) + 2.0 * integrate.quad(
        lambda q: 2.0 * (2.0 / np.pi) * _x_over_sinh(np.array([0.5 * np.pi * q]))[0] * phi(q),
        0.0, np.inf, limit=400, epsabs=1e-14)[0]
    return lhs, float(rhs)


# ------------------------------------------------------------ report suites

def fourier_closed_form_reports(grid: Grid, tol_fft: float = 1e-10,
                                tol_quad: float = 1e-8) -> list[OperatorReport]:
    x, xi = grid.x, grid.frequencies
    reps = []
    for name, fn, sym in (
        ("fft_sech", lambda q: 1.0 / np.cosh(q), sech_hat),
        ("fft_sech2", lambda q: 1.0 / np.cosh(q) ** 2, sech2_hat),
        ("fft_alpha1", alpha1, alpha1_hat),
        ("fft_alpha2", alpha2, alpha2_hat),
        ("fft_alpha3", alpha3, alpha3_hat),
    ):
        reps.append(OperatorReport.from_residual(name, fourier(fn(x), grid) - sym(xi), tol_fft))
    samples = np.array([0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0])
    res = [_quad_cos_transform(_sech, s) - sech_hat(s) for s in samples]
    reps.append(OperatorReport.from_residual("quad_sech", np.array(res), tol_quad))
    res = [_quad_cos_transform(lambda q: _sech(q) ** 2, s) - sech2_hat(s) for s in samples]
    reps.append(OperatorReport.from_residual("quad_sech2", np.array(res), tol_quad))
    nz = samples[samples > 0]
    res = [_quad_tanh_transform(s) - tanh_hat_pv(s) for s in nz]
    reps.append(OperatorReport.from_residual("quad_tanh_pv", np.array(res), tol_quad))
    return reps


def convolution_identities(tol: float = 1e-8, weak_tol: float = 1e-8,
                           slope_window: tuple[float, float] = (1.8, 2.2),
                           s0: float = 1.0 / 80.0) -> list[OperatorReport]:
    """Convolution identities: two pointwise, two in weak form, and the PV exclusion slope."""
    samples = np.array([0.0, 0.3, 0.7, 1.0, 1.5, 2.5, 4.0])
    reps = []

    def sech_conv(q):
        return integrate.quad(lambda e: Sech(q - e) * Sech(e), -np.inf, np.inf, limit=400,
                              epsabs=1e-15)[0]

    closed2 = 2.0 * (2.0 / np.pi) * _x_over_sinh(0.5 * np.pi * samples)
    res = np.array([sech_conv(q) for q in samples]) - closed2
    reps.append(OperatorReport.from_residual("sech_conv_sech", res, tol))

    closed3 = 2.0 * samples * Sech(samples)
    pv = pv_cosech(Sech, samples, s0)
    reps.append(OperatorReport.from_residual("sech_conv_pvcosech", pv - closed3, tol))
    oracle = np.array([_quad_pv_sech_cosech(q) for q in samples])
    reps.append(OperatorReport.from_residual("sech_conv_pvcosech_quad", oracle - closed3, tol))

    res4 = [np.subtract(*weak_identity4(w)) for w in PROBE_WIDTHS]
    reps.append(OperatorReport.from_residual("tanh2_weak", np.array(res4), weak_tol))
    res5 = [np.subtract(*weak_identity5(w, s0)) for w in PROBE_WIDTHS]
    reps.append(OperatorReport.from_residual("pvcosech_conv_pvcosech_weak", np.array(res5),
                                             weak_tol))

    slope, _ = pv_convergence_slope(Sech, 1.0, 2.0 * Sech(1.0), s0)
    lo, hi = slope_window
    reps.append(OperatorReport(
        "pv_exclusion_slope", slope, slope, hi,
        bool(lo <= slope <= hi)))
    return reps


def nonresonance_reports(grid: Grid, tol_zero: float = 1e-9,
                         tol_fft: float = 1e-10) -> list[OperatorReport]:
    vals = dft_at(alpha1(grid.x), grid, [SQRT3, -SQRT3])
    reps = [OperatorReport.from_residual("alpha1_hat_at_sqrt3", vals, tol_zero)]
    full = fourier(alpha1(grid.x), grid) - alpha1_hat(grid.frequencies)
    reps.append(OperatorReport.from_residual("alpha1_hat_closed_vs_fft", full, tol_fft))
    return reps


def normal_form_reports(tol: float = 1e-8) -> list[OperatorReport]:
    """Cancelled alpha11^ against one-sided limits of the raw quotient near sqrt(3)."""
    res = []
    for d in (1e-4, -1e-4):
        q = np.array([SQRT3 + d])
        res.append(alpha11_uncancelled(q)[0] - normal_form_symbols(q)[0][0])
    return [OperatorReport.from_residual("alpha11_limit_at_sqrt3", np.array(res), tol)]


def I_hat_report(grid: Grid, tol: float = 1e-7) -> OperatorReport:
    x = grid.x
    g = SpectralField(grid, fourier(1.0 / np.cosh(x), grid))
    target = fourier(-x / np.cosh(x), grid)
    return OperatorReport.from_residual("I_hat_sech", I_hat(g).coefficients - target, tol)


def sech_conv_sech_at_zero() -> float:
    return integrate.quad(lambda e: Sech(e) ** 2, -np.inf, np.inf, epsabs=1e-15)[0]


def default_s0(grid: Optional[Grid] = None) -> float:
    return 1.0 / 80.0 if grid is None else 0.5 * grid.dxi
