"""Profiles, decay fits, modified scattering and stationary-phase geometry.

The profile is f(t) = exp(-i t <D>) v(t); all statements about scattering are
made for the weighted transform F(t, xi) = <xi>^{3/2} f^(t, xi).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline

from .closedform import normal_form_symbols
from .dynamics import ProbeRecord, SimState, field_norms, light_cone_mask, normal_form_B_hat
from .grid import Grid, RealField, SpectralField, fourier, inverse_fourier, japanese
from .transforms import I_values, OperatorReport


class InsufficientDataError(ValueError):
    """Not enough samples, or too short a time span, for a fit."""


# ------------------------------------------------------------ profiles

@dataclass
class ProfileSnapshot:
    t: float
    f_hat: SpectralField
    v_origin: complex = 0.0

    @property
    def weighted(self) -> np.ndarray:
        return self.f_hat.grid.jbracket ** 1.5 * self.f_hat.coefficients

    def hermitian_defect(self) -> float:
        """sup |f^(-xi) - f^(xi)|: v is even, so its transform is even."""
        c = self.f_hat.coefficients
        return float(np.max(np.abs(c - c[self.f_hat.grid.mirror])))


def extract_profile(state: SimState) -> ProfileSnapshot:
    g = state.grid
    f = np.exp(-1j * state.t * g.jbracket) * state.v_hat
    return ProfileSnapshot(state.t, SpectralField(g, f), state.v_origin)


def profile_from_v_hat(t: float, v_hat: np.ndarray, grid: Grid) -> ProfileSnapshot:
    return ProfileSnapshot(t, SpectralField(grid, np.exp(-1j * t * grid.jbracket) * v_hat))


# ------------------------------------------------------------ norms

@dataclass
class BootstrapNorms:
    t: float
    sup_v: float
    H2_v: float
    H1Lv: float
    xv_L2: float
    profile_sup: float
    localdecay_dxv: float

    def weighted_total(self, delta: float) -> float:
        """The bracketed bootstrap quantity at this time."""
        jt = np.sqrt(1.0 + self.t**2)
        return (jt**0.5 * self.sup_v + jt**-delta * self.H2_v + jt**-delta * self.H1Lv
                + jt ** (-1.0 - delta) * self.xv_L2 + self.profile_sup)


def bootstrap_norms(state: SimState, profile: Optional[ProfileSnapshot] = None,
                    delta: float = 0.01) -> BootstrapNorms:
    n = field_norms(state)
    if profile is not None:
        n["profile_sup"] = float(np.max(np.abs(profile.weighted)))
    return BootstrapNorms(state.t, n["sup_v"], n["H2_v"], n["H1Lv"], n["xv_L2"],
                          n["profile_sup"], n["localdecay_dxv"])


# ------------------------------------------------------------ fits

def fit_exponent(t: Sequence[float], y: Sequence[float], window: Optional[Sequence[float]] = None,
                 min_samples: int = 2, min_decades: float = 0.0) -> float:
    """Least-squares slope of log y against log t inside ``window``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = np.isfinite(y) & (y > 0) & (t > 0)
    if window is not None:
        sel &= (t >= window[0] - 1e-9) & (t <= window[1] + 1e-9)
    if sel.sum() < min_samples:
        raise InsufficientDataError(f"need {min_samples} positive samples, have {sel.sum()}")
    ts = t[sel]
    if np.log10(ts.max() / ts.min()) < min_decades - 1e-9:
        raise InsufficientDataError("time samples span less than the required decades")
    return float(np.polyfit(np.log(ts), np.log(y[sel]), 1)[0])


# ------------------------------------------------------------ integrating factor

def phase_coefficient(xi) -> np.ndarray:
    """(1/4) <xi>^{-7} (1 + 3 xi^2)."""
    xi = np.asarray(xi, dtype=float)
    return 0.25 * japanese(xi) ** -7 * (1.0 + 3.0 * xi**2)


def accumulate_Phi(snapshots: Sequence[ProfileSnapshot]) -> tuple[np.ndarray, np.ndarray]:
    """Phi(t_i, xi) by the trapezoid rule in log t; returns (times, table[i, k])."""
    if not snapshots:
        raise InsufficientDataError("no snapshots")
    times = np.array([s.t for s in snapshots])
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshots must be strictly increasing in time")
    if abs(times[0] - 1.0) > 1e-9:
        raise ValueError("the first snapshot must be taken at t = 1")
    xi = snapshots[0].f_hat.grid.frequencies
    c = phase_coefficient(xi)
    vals = np.array([np.abs(s.weighted) ** 2 for s in snapshots])
    logt = np.log(times)
    table = np.zeros_like(vals)
    incr = 0.5 * (vals[1:] + vals[:-1]) * np.diff(logt)[:, None]
    table[1:] = np.cumsum(incr, axis=0)
    return times, c[None, :] * table


def accumulate_Phi_series(times: np.ndarray, values: np.ndarray, xi) -> np.ndarray:
    """Same quadrature for a time series of F at fixed frequencies (values[i, j])."""
    times = np.asarray(times, dtype=float)
    logt = np.log(times)
    v2 = np.abs(values) ** 2
    out = np.zeros_like(v2)
    out[1:] = np.cumsum(0.5 * (v2[1:] + v2[:-1]) * np.diff(logt)[:, None], axis=0)
    return phase_coefficient(xi)[None, :] * out


# ------------------------------------------------------------ modified scattering

@dataclass
class ModifiedScatteringReport:
    xi_samples: np.ndarray
    Phi: np.ndarray
    Phi_times: np.ndarray
    W_hat_estimate: np.ndarray
    W_time: float
    cauchy_times: np.ndarray
    cauchy_differences: np.ndarray
    stabilization_exponent: float
    psi_frequencies: np.ndarray
    psi_predicted: np.ndarray
    psi_measured: np.ndarray
    psi_fit_residual: np.ndarray

    @property
    def psi_ratio(self) -> np.ndarray:
        return self.psi_measured / self.psi_predicted

    def to_json(self) -> dict:
        def c2(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "xi_samples": self.xi_samples.tolist(),
            "Phi_times": self.Phi_times.tolist(),
            "Phi_at_samples": self.Phi.tolist(),
            "W_time": self.W_time,
            "W_hat_at_samples": c2(self.W_hat_estimate),
            "cauchy_times": self.cauchy_times.tolist(),
            "cauchy_differences": self.cauchy_differences.tolist(),
            "stabilization_exponent": self.stabilization_exponent,
            "psi_frequencies": self.psi_frequencies.tolist(),
            "psi_predicted": self.psi_predicted.tolist(),
            "psi_measured": self.psi_measured.tolist(),
            "psi_ratio": self.psi_ratio.tolist(),
            "psi_fit_residual": self.psi_fit_residual.tolist(),
        }


def normal_form_correction(t, v_origin, xi) -> np.ndarray:
    """r^(t, xi) = <xi>^{3/2} exp(-i t <xi>) B(v, v)^(t, xi) (broadcasting t, v_origin)."""
    xi = np.asarray(xi, dtype=float)
    t = np.asarray(t, dtype=float)[..., None] if np.ndim(t) else float(t)
    v0 = np.asarray(v_origin, dtype=complex)[..., None] if np.ndim(v_origin) else v_origin
    jb = japanese(xi)
    return jb**1.5 * np.exp(-1j * t * jb) * normal_form_B_hat(v0, xi)


def psi_from_probes(probes: Sequence[ProbeRecord], window: Sequence[float],
                    use_normal_form: bool = True):
    """Regress the unwrapped phase of F (+ r^) on log t; returns (xi, rate, residual)."""
    t = np.array([p.t for p in probes])
    F = np.array([p.F for p in probes])
    xi = probes[0].xi
    if use_normal_form:
        v0 = np.array([p.v_origin for p in probes])
        F = F + normal_form_correction(t, v0, xi)
    sel = (t >= window[0] - 1e-9) & (t <= window[1] + 1e-9)
    if sel.sum() < 3:
        raise InsufficientDataError("too few probe records in the phase-fit window")
    phase = np.unwrap(np.angle(F[sel]), axis=0)
    lt = np.log(t[sel])
    rates = np.empty(len(xi))
    resid = np.empty(len(xi))
    for j in range(len(xi)):
        p = np.polyfit(lt, phase[:, j], 1)
        rates[j] = p[0]
        resid[j] = float(np.std(phase[:, j] - np.polyval(p, lt)))
    return xi, -rates, resid


def _index_of_times(times: np.ndarray, wanted: Sequence[float]) -> list[int]:
    out = []
    for w in wanted:
        j = int(np.argmin(np.abs(times - w)))
        if abs(times[j] - w) > 1e-6 * max(1.0, w):
            raise InsufficientDataError(f"no snapshot at t = {w}")
        out.append(j)
    return out


def modified_scattering_check(snapshots: Sequence[ProfileSnapshot],
                              probes: Optional[Sequence[ProbeRecord]] = None,
                              window: Sequence[float] = (50.0, 250.0),
                              cauchy_times: Sequence[float] = (5, 10, 20, 50, 100, 200),
                              psi_frequencies: Sequence[float] = (0.0, 0.5, 1.0),
                              xi_samples: Optional[Sequence[float]] = None,
                              integrating_factor: bool = True,
                              ) -> ModifiedScatteringReport:
    """Cauchy differences, limiting profile and phase-law fit.

    With ``integrating_factor=False`` (free-flow runs) the raw weighted profile
    is compared and the phase is fitted without the normal-form correction,
    since the free flow leaves the profile constant.
    """
    if len(snapshots) < 4:
        raise InsufficientDataError("need at least 4 snapshots")
    times = np.array([s.t for s in snapshots])
    if times[-1] / times[0] < 10.0 - 1e-9:
        raise InsufficientDataError("snapshots must span at least one decade in t")
    grid = snapshots[0].f_hat.grid
    Phi_times, Phi = accumulate_Phi(snapshots)
    if not integrating_factor:
        Phi = np.zeros_like(Phi)
    xi = grid.frequencies

    corrected = [s.weighted * np.exp(1j * Phi[i]) for i, s in enumerate(snapshots)]

    # Cauchy differences between consecutive base times
    idx = _index_of_times(times, cauchy_times)
    diffs = np.array([np.max(np.abs(corrected[b] - corrected[a]))
                      for a, b in zip(idx[:-1], idx[1:])])
    t1 = times[idx[:-1]]
    try:
        exponent = fit_exponent(t1, diffs)
    except InsufficientDataError:  # differences vanish identically
        exponent = float("nan")

    # limiting profile from the latest snapshot inside the fit window
    inside = np.where(times <= window[1] + 1e-9)[0]
    iw = int(inside[-1])
    W = corrected[iw]

    if xi_samples is None:
        xi_samples = psi_frequencies
    sidx = [int(np.argmin(np.abs(xi - q))) for q in xi_samples]
    pidx = [int(np.argmin(np.abs(xi - q))) for q in psi_frequencies]
    psi_pred = phase_coefficient(xi[pidx]) * np.abs(W[pidx]) ** 2
    if probes:
        pxi, psi_meas, resid = psi_from_probes(probes, window, integrating_factor)
        order = [int(np.argmin(np.abs(pxi - q))) for q in psi_frequencies]
        psi_meas, resid = psi_meas[order], resid[order]
    else:
        sel = (times >= window[0] - 1e-9) & (times <= window[1] + 1e-9)
        v0 = np.array([s.v_origin for s in snapshots])
        G = np.array([s.weighted[pidx] for s in snapshots])
        if integrating_factor:
            G = G + normal_form_correction(times, v0, xi[pidx])
        phase = np.unwrap(np.angle(G[sel]), axis=0)
        lt = np.log(times[sel])
        psi_meas = np.empty(len(pidx))
        resid = np.empty(len(pidx))
        for j in range(len(pidx)):
            p = np.polyfit(lt, phase[:, j], 1)
            psi_meas[j] = -p[0]
            resid[j] = float(np.std(phase[:, j] - np.polyval(p, lt)))
    return ModifiedScatteringReport(
        xi_samples=xi[sidx], Phi=Phi[:, sidx], Phi_times=Phi_times,
        W_hat_estimate=W[sidx], W_time=float(times[iw]),
        cauchy_times=times[idx], cauchy_differences=diffs, stabilization_exponent=exponent,
        psi_frequencies=xi[pidx], psi_predicted=psi_pred, psi_measured=psi_meas,
        psi_fit_residual=resid,
    )


def limiting_profile(snapshots: Sequence[ProfileSnapshot], t_max: float) -> tuple[float, np.ndarray]:
    """(time, W^ on the frequency lattice) from the latest snapshot with t <= t_max."""
    Phi_times, Phi = accumulate_Phi(snapshots)
    inside = np.where(Phi_times <= t_max + 1e-9)[0]
    i = int(inside[-1])
    return float(Phi_times[i]), snapshots[i].weighted * np.exp(1j * Phi[i])


# ------------------------------------------------------------ asymptotic field

def _complex_spline(xi: np.ndarray, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    order = np.argsort(xi)
    xs, vs = xi[order], values[order]
    re = CubicSpline(xs, vs.real)
    im = CubicSpline(xs, vs.imag)
    lo, hi = xs[0], xs[-1]

    def f(q):
        q = np.asarray(q, dtype=float)
        out = re(q) + 1j * im(q)
        return np.where((q >= lo) & (q <= hi), out, 0.0)

    return f


def asymptotic_reconstruction(W_hat, t: float, grid: Grid,
                              W_xi: Optional[np.ndarray] = None) -> RealField:
    """Leading-order u from the limiting profile.

    u(t, x) ~ 2 Re I[h](x), h(y) = e^{i pi/4} t^{-1/2} e^{i rho} e^{-i psi(y/rho) log t}
    W^(y/rho) for |y| < t, rho = sqrt(t^2 - y^2). ``W_hat`` is either a callable
    or samples at frequencies ``W_xi`` (the lattice by default), interpolated
    by cubic splines.
    """
    if t < 1.0:
        raise ValueError("the asymptotic formula is stated for t >= 1")
    if callable(W_hat):
        Wf = W_hat
    else:
        xi = grid.frequencies if W_xi is None else np.asarray(W_xi, dtype=float)
        Wf = _complex_spline(xi, np.asarray(W_hat, dtype=complex))
    y = grid.x
    inside = np.abs(y) < t
    rho = np.sqrt(np.maximum(t * t - y * y, 0.0))
    h = np.zeros(grid.n_points, dtype=complex)
    q = np.zeros_like(y)
    q[inside] = y[inside] / rho[inside]
    Wq = Wf(q[inside])
    psi = phase_coefficient(q[inside]) * np.abs(Wq) ** 2
    h[inside] = (np.exp(0.25j * np.pi) * t**-0.5 * np.exp(1j * rho[inside])
                 * np.exp(-1j * psi * np.log(t)) * Wq)
    u = 2.0 * (I_values(h.real, grid))  # Re I[h] = I[Re h]
    return RealField(grid, u, "odd", check=False)


def reconstruction_ratio(u_sim: RealField, u_asym: RealField, t: float,
                         fraction: float = 0.8) -> float:
    gate = light_cone_mask(u_sim.grid, t, fraction)
    diff = np.max(np.abs(u_sim.values[gate] - u_asym.values[gate]))
    return float(diff / np.max(np.abs(u_sim.values[gate])))


# ------------------------------------------------------------ linear checks

def free_evolution(f0: np.ndarray, t: float, grid: Grid) -> np.ndarray:
    """exp(i t <D>) f0 for complex samples f0."""
    return inverse_fourier(np.exp(1j * t * grid.jbracket) * fourier(f0, grid), grid)


def stationary_phase_field(f0: np.ndarray, t: float, grid: Grid) -> np.ndarray:
    """t^{-1/2} e^{i pi/4} e^{i rho} <xi0>^{3/2} f0^(xi0) on |x| < t, xi0 = -x/rho."""
    x = grid.x
    out = np.zeros(grid.n_points, dtype=complex)
    inside = np.abs(x) < t
    rho = np.sqrt(t * t - x[inside] ** 2)
    xi0 = -x[inside] / rho
    from .closedform import dft_at

    fh = dft_at(f0, grid, xi0)
    out[inside] = t**-0.5 * np.exp(0.25j * np.pi) * np.exp(1j * rho) * japanese(xi0) ** 1.5 * fh
    return out


def linear_asymptotics_check(f0: np.ndarray, t: float, grid: Grid,
                             bound: float = np.inf) -> OperatorReport:
    """sup |exp(i t <D>) f0 - stationary-phase formula| * t^{2/3} (compared to ``bound``)."""
    if t < 1.0:
        raise ValueError("t must be at least 1")
    if t > grid.half_length - 5.0:
        raise ValueError("the light cone leaves the periodic domain")
    exact = free_evolution(f0, t, grid)
    approx = stationary_phase_field(f0, t, grid)
    diff = float(np.max(np.abs(exact - approx))) if np.any(f0) else 0.0
    scaled = diff * t ** (2.0 / 3.0)
    return OperatorReport(f"linear_asymptotics_t{t:g}", scaled, diff, bound, bool(scaled <= bound))


@dataclass
class LocalDecayFit:
    times: np.ndarray
    values: np.ndarray
    exponent: float
    degenerate: bool


def local_decay_check(times: Sequence[float], values: Sequence[float],
                      window: Optional[Sequence[float]] = None) -> LocalDecayFit:
    """Fit the decay exponent of a weighted norm; zero data is reported as degenerate."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = np.ones_like(times, dtype=bool)
    if window is not None:
        sel = (times >= window[0] - 1e-9) & (times <= window[1] + 1e-9)
    if sel.sum() < 6:
        raise InsufficientDataError("need at least 6 time samples")
    if np.log10(times[sel].max() / times[sel].min()) < 1.0 - 1e-9 and window is None:
        raise InsufficientDataError("time samples must span a decade")
    if np.all(values[sel] == 0):
        return LocalDecayFit(times[sel], values[sel], float("nan"), True)
    return LocalDecayFit(times[sel], values[sel], fit_exponent(times[sel], values[sel]), False)


def weighted_norm(values: np.ndarray, grid: Grid, power: float) -> float:
    """|| <x>^{-power} values ||_{L^2}."""
    return float(np.sqrt(np.sum(np.abs(values) ** 2 * (1.0 + grid.x**2) ** -power) * grid.dx))


def linear_local_decay(f0: np.ndarray, times: Sequence[float], grid: Grid) -> LocalDecayFit:
    vals = [weighted_norm(free_evolution(f0, t, grid), grid, 0.5) for t in times]
    return local_decay_check(times, vals)


def linear_sup_decay(f0: np.ndarray, times: Sequence[float], grid: Grid) -> float:
    vals = [float(np.max(np.abs(free_evolution(f0, t, grid)))) for t in times]
    return fit_exponent(times, vals)


# ------------------------------------------------------------ profile ODE

_GL16_NODES, _GL16_WEIGHTS = np.polynomial.legendre.leggauss(16)


def profile_ode_rhs(f_hat: np.ndarray, grid: Grid, s, third_index: np.ndarray) -> np.ndarray:
    """The four explicit 1/s terms at time s (or array of times) with f^ frozen.

    ``third_index[k]`` is the lattice index of xi_k / 3 (or -1 when off-lattice).
    Returns an array [..., len(third_index)] for the frequencies with valid indices.
    """
    xi_all = grid.frequencies
    valid = third_index >= 0
    k = np.where(valid)[0]
    xi = xi_all[k]
    jb = japanese(xi)
    jb3 = japanese(xi / 3.0)
    f = f_hat[k]
    f3 = f_hat[third_index[k]]
    fm = f_hat[grid.mirror[k]]
    s = np.asarray(s, dtype=float)[..., None]
    c13 = 1.0 / (36.0 * np.sqrt(3.0))
    amp1 = c13 * jb**0.5 * jb3**-3 * (3.0 + xi**2)
    F = jb**1.5 * f
    term1 = amp1 * np.exp(1j * s * (-jb + 3.0 * jb3)) * f3**3 / s
    term2 = jb**-7 * (1.0 + 3.0 * xi**2) * np.abs(F) ** 2 * F / (4j * s)
    term3 = (np.exp(-2j * s * jb) * jb**-2.5 * (1.0 + 3.0 * xi**2)
             * np.abs(fm) ** 2 * np.conj(fm) / (4j * s))
    # transform of conj(f) at xi/3 is conj(f^(-xi/3))
    fbar3 = np.conj(f_hat[grid.mirror[third_index[k]]])
    term4 = -amp1 * np.exp(-1j * s * (jb + 3.0 * jb3)) * fbar3**3 / s
    return term1 + term2 + term3 + term4


def third_indices(grid: Grid) -> np.ndarray:
    """Lattice index of xi/3 for frequencies with k divisible by 3 (else -1)."""
    n = grid.n_points
    kk = np.rint(grid.frequencies / grid.dxi).astype(int)
    out = np.full(n, -1, dtype=int)
    ok = (kk % 3 == 0)
    out[ok] = (kk[ok] // 3) % n
    out[grid.nyquist] = -1
    return out


@dataclass
class ODEResidualRow:
    t: float
    delta: float
    residual_sup: float
    scaled: float
    lhs_sup: float


def profile_ode_residual(triples: Sequence[tuple[ProfileSnapshot, ProfileSnapshot, ProfileSnapshot]],
                         xi_max: Optional[float] = None) -> list[ODEResidualRow]:
    """Residual of the profile ODE at the centres of (t - D, t, t + D) triples.

    Left side: centred difference of F + r^. Right side: the four explicit
    terms averaged over [t - D, t + D] by Gauss-Legendre, with f^ frozen at t.
    """
    rows = []
    for before, mid, after in triples:
        if not (before.t < mid.t < after.t):
            raise ValueError("triples must be ordered in time")
        if after.t - before.t > 0.2 * mid.t:
            raise ValueError("snapshot spacing too coarse for a centred derivative")
        grid = mid.f_hat.grid
        tri = third_indices(grid)
        valid = tri >= 0
        xi = grid.frequencies[valid]

        def G(p: ProfileSnapshot) -> np.ndarray:
            return (p.weighted[valid]
                    + normal_form_correction(p.t, p.v_origin, xi))

        lhs = (G(after) - G(before)) / (after.t - before.t)
        half = 0.5 * (after.t - before.t)
        centre = 0.5 * (after.t + before.t)
        s = centre + half * _GL16_NODES
        rhs_s = profile_ode_rhs(mid.f_hat.coefficients, grid, s, tri)
        rhs = 0.5 * np.sum(_GL16_WEIGHTS[:, None] * rhs_s, axis=0)
        res = np.abs(lhs - rhs)
        if xi_max is not None:
            res = res[np.abs(xi) <= xi_max]
        r = float(np.max(res))
        rows.append(ODEResidualRow(mid.t, half, r, r * mid.t ** 1.2,
                                   float(np.max(np.abs(lhs)))))
    return rows


def residual_trend(rows: Sequence[ODEResidualRow]) -> float:
    """Log-log slope of residual * t^{6/5} against t (non-positive means bounded)."""
    return fit_exponent([r.t for r in rows], [r.scaled for r in rows])


# ------------------------------------------------------------ stationary phase

_SIGNS = {1: (1, 1, 1), 2: (1, -1, 1), 3: (1, -1, -1), 4: (-1, -1, -1)}


def phase(j: int, xi1, xi2, xi3, xi) -> np.ndarray:
    s1, s2, s3 = _SIGNS[j]
    return (-japanese(xi) + s1 * japanese(xi1) + s2 * japanese(xi2) + s3 * japanese(xi3))


def _jb(z):
    return np.sqrt(1.0 + z * z)  # complex-safe bracket


def pulled_back_gradient(j: int, xi: float, p) -> np.ndarray:
    """Gradient of Psi_j(xi1, xi2) = phi_j(xi1, xi2, xi - xi1 - xi2)."""
    s1, s2, s3 = _SIGNS[j]
    a, b = p[0], p[1]
    c = xi - a - b
    g3 = s3 * c / _jb(c)
    return np.array([s1 * a / _jb(a) - g3, s2 * b / _jb(b) - g3])


def pulled_back_hessian(j: int, xi: float, p, h: float = 1e-20) -> np.ndarray:
    """Hessian by complex-step differentiation of the analytic gradient."""
    p = np.asarray(p, dtype=float)
    H = np.empty((2, 2))
    for k in range(2):
        dp = np.zeros(2, dtype=complex)
        dp[k] = 1j * h
        H[:, k] = pulled_back_gradient(j, xi, p + dp).imag / h
    return 0.5 * (H + H.T)


@dataclass
class PhaseData:
    j: int
    xi: float
    critical_point: tuple
    critical_value: float
    hessian: np.ndarray
    hessian_det: float
    numeric_point: tuple = ()
    numeric_hessian: Optional[np.ndarray] = None
    point_error: float = 0.0
    hessian_error: float = 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["hessian"] = np.asarray(self.hessian).tolist()
        d["numeric_hessian"] = (None if self.numeric_hessian is None
                                else np.asarray(self.numeric_hessian).tolist())
        return d


def closed_form_phase_data(j: int, xi: float):
    jb = float(japanese(xi))
    jb3 = float(japanese(xi / 3.0))
    if j == 1:
        pt, val = (xi / 3.0, xi / 3.0), -jb + 3.0 * jb3
        H = jb3**-3 * np.array([[2.0, 1.0], [1.0, 2.0]])
    elif j == 2:
        pt, val = (xi, -xi), 0.0
        H = jb**-3 * np.array([[2.0, 1.0], [1.0, 0.0]])
    elif j == 3:
        pt, val = (-xi, xi), -2.0 * jb
        H = -jb**-3 * np.array([[0.0, 1.0], [1.0, 2.0]])
    elif j == 4:
        pt, val = (xi / 3.0, xi / 3.0), -jb - 3.0 * jb3
        H = -jb3**-3 * np.array([[2.0, 1.0], [1.0, 2.0]])
    else:
        raise ValueError("phase index must be 1, 2, 3 or 4")
    return pt, val, H


def stationary_phase_data(j: int, xi: float, start_offset: float = 0.3) -> PhaseData:
    """Closed-form critical data, confirmed by a numerical root of the gradient."""
    pt, val, H = closed_form_phase_data(j, xi)
    start = np.array(pt) + start_offset * np.array([1.0, -0.7])
    sol = optimize.root(lambda p: pulled_back_gradient(j, xi, p).real, start,
                        jac=lambda p: pulled_back_hessian(j, xi, p), method="hybr",
                        options={"xtol": 1e-15})
    num_pt = sol.x
    num_H = pulled_back_hessian(j, xi, num_pt)
    perr = float(np.max(np.abs(num_pt - np.array(pt))))
    herr = float(np.max(np.abs(num_H - H)))
    num_val = float(phase(j, num_pt[0], num_pt[1], xi - num_pt[0] - num_pt[1], xi))
    if abs(num_val - val) > 1e-9:
        perr = max(perr, abs(num_val - val))
    return PhaseData(j, float(xi), tuple(float(q) for q in pt), float(val), H,
                     float(np.linalg.det(H)), tuple(float(q) for q in num_pt), num_H,
                     perr, herr)


def swap_identity_residual(n_samples: int = 1000, seed: int = 0, scale: float = 10.0) -> float:
    """max |phi_3(a, b, c) + 2<xi> + phi_2(b, a, c)| with xi = a + b + c."""
    rng = np.random.default_rng(seed)
    a, b, c = rng.uniform(-scale, scale, (3, n_samples))
    xi = a + b + c
    r = phase(3, a, b, c, xi) + 2.0 * japanese(xi) + phase(2, b, a, c, xi)
    return float(np.max(np.abs(r)))


@dataclass
class GradientSample:
    name: str
    ratio_min: float
    ratio_max: float
    window: tuple
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.window[0] <= self.ratio_min and self.ratio_max <= self.window[1]


def phase_gradient_bounds_sampler(j: int, xi: float, n_samples: int = 1000, seed: int = 0,
                                  c_star: float = 0.1,
                                  windows: Optional[dict] = None) -> list[GradientSample]:
    """Sample the comparability claims for |grad Psi_j| in the named regions."""
    if j not in (1, 2):
        raise ValueError("the sampler covers Psi_1 and Psi_2")
    if xi < 1.0:
        raise ValueError("the near-critical scaling is stated for xi >= 1")
    w = {"near_critical": (0.1, 10.0), "region_I": (0.05, 4.0), "triangle": (0.02, 50.0)}
    if windows:
        w.update(windows)
    rng = np.random.default_rng(seed)
    out = []
    pt, _, _ = closed_form_phase_data(j, xi)

    def grad_norm(a, b):
        return np.hypot(*pulled_back_gradient(j, xi, (a, b)))

    # near the critical point: |grad| / (|eta1| + |eta2|) against the Hessian scale,
    # |xi|^{-3} for Psi_2 and <xi/3>^{-3} for Psi_1
    eta = rng.uniform(-xi / 100.0, xi / 100.0, (n_samples, 2))
    g = grad_norm(pt[0] + eta[:, 0], pt[1] + eta[:, 1])
    scale = abs(xi) ** 3 if j == 2 else float(japanese(xi / 3.0)) ** 3
    ratio = g * scale / (np.abs(eta[:, 0]) + np.abs(eta[:, 1]))
    out.append(GradientSample(f"psi{j}_near_critical", float(ratio.min()), float(ratio.max()),
                              w["near_critical"], n_samples))

    box = rng.uniform(-2.0 * xi, 2.0 * xi, (20 * n_samples, 2))
    a, b = box[:, 0], box[:, 1]
    c = xi - a - b
    if j == 2:
        keep = (a * c <= 0) | (b * c >= 0)
        g = grad_norm(a[keep][:n_samples], b[keep][:n_samples])
        out.append(GradientSample("psi2_region_I", float(g.min()), float(g.max()),
                                  w["region_I"], int(g.size)))
    else:
        tri = (a > 0) & (b > 0) & (c > 0)
        far = np.hypot(a - pt[0], b - pt[1]) > c_star * xi
        keep = tri & far
        aa, bb, cc = a[keep][:n_samples], b[keep][:n_samples], c[keep][:n_samples]
        g = grad_norm(aa, bb)
        ref = japanese(aa) ** -2 + japanese(bb) ** -2 + japanese(cc) ** -2
        r = g / ref
        out.append(GradientSample("psi1_triangle_outside_disk", float(r.min()), float(r.max()),
                                  w["triangle"], int(r.size)))
        outside = ~tri
        g = grad_norm(a[outside][:n_samples], b[outside][:n_samples])
        out.append(GradientSample("psi1_outside_triangle", float(g.min()), float(g.max()),
                                  w["region_I"], int(g.size)))
    return out
