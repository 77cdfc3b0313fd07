"""Evolution of odd perturbations of the kink and the transformed variables.

The perturbation u of phi = K + u obeys

    (d_t^2 - d_x^2 + 1) u = -sin(K + u) + sin K + u,

which is integrated exactly (no Taylor truncation) by Strang splitting: the
flat Klein-Gordon flow is applied exactly in Fourier space and the right-hand
side is applied as a kick. The same stepper with the vacuum background
phi = 0 + u evolves the breather, and with the transformed right-hand side
D* N(I[w]) it evolves w = D* u directly.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .closedform import coefficient_set
from .grid import (
    Grid,
    RealField,
    derivative_values,
    fourier,
    inverse_fourier,
    make_grid,
    multiply_values,
    parity_defect,
)
from .transforms import (
    D_values,
    Dstar_values,
    I_values,
    Itilde_values,
    boundary_leak,
)


class SimulationError(RuntimeError):
    """Raised when the evolution produces non-finite values."""

    def __init__(self, message: str, last_good: Optional["SimState"] = None):
        super().__init__(message)
        self.last_good = last_good


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


# ------------------------------------------------------------ exact solutions

def lorentz_factor(ell: float) -> float:
    if not -1.0 < ell < 1.0:
        raise ValueError(f"kink speed must satisfy |ell| < 1, got {ell}")
    return 1.0 / math.sqrt(1.0 - ell * ell)


def kink(x, ell: float = 0.0, a: float = 0.0, t: float = 0.0):
    """K(gamma (x - ell t - a)) with K(z) = 4 arctan(exp z)."""
    g = lorentz_factor(ell)
    z = g * (np.asarray(x, dtype=float) - ell * t - a)
    # 4 arctan(e^z) = pi + 2 arctan(sinh z) avoids overflow in exp
    return np.pi + 2.0 * np.arctan(np.sinh(z))


def kink_t(x, ell: float = 0.0, a: float = 0.0, t: float = 0.0):
    g = lorentz_factor(ell)
    z = g * (np.asarray(x, dtype=float) - ell * t - a)
    return -2.0 * g * ell / np.cosh(z)


def kink_field(grid: Grid, ell: float = 0.0, a: float = 0.0, t: float = 0.0) -> RealField:
    return RealField(grid, kink(grid.x, ell, a, t), "none", check=False)


def _check_beta(beta: float) -> float:
    if not (0.0 < abs(beta) < 1.0):
        raise ValueError(f"breather parameter must satisfy 0 < |beta| < 1, got {beta}")
    return math.sqrt(1.0 - beta * beta)


def breather(t, x, beta: float):
    """4 arctan((beta/alpha) sin(alpha t) / cosh(beta x)), alpha = sqrt(1 - beta^2)."""
    alpha = _check_beta(beta)
    s = (beta / alpha) * np.sin(alpha * t) / np.cosh(beta * np.asarray(x, dtype=float))
    return 4.0 * np.arctan(s)


def breather_t(t, x, beta: float):
    alpha = _check_beta(beta)
    sech = 1.0 / np.cosh(beta * np.asarray(x, dtype=float))
    s = (beta / alpha) * np.sin(alpha * t) * sech
    return 4.0 * beta * np.cos(alpha * t) * sech / (1.0 + s * s)


def breather_period(beta: float) -> float:
    return 2.0 * np.pi / _check_beta(beta)


# ------------------------------------------------------------ energy

def energy(phi: RealField, phit: RealField) -> float:
    """Rectangle-rule integral of (phi_t^2 + phi_x^2)/2 + 1 - cos phi.

    A winding m (phi rising from 0 to 2 pi m across the domain) is removed with
    m K before spectral differentiation and its derivative added back exactly.
    """
    grid = phi.grid
    x = grid.x
    jump = phi.values[-1] - phi.values[0]
    m = int(round(jump / (2.0 * np.pi)))
    base = m * kink(x)
    phix = derivative_values(phi.values - base, grid) + m * 2.0 / np.cosh(x)
    dens = 0.5 * phit.values**2 + 0.5 * phix**2 + (1.0 - np.cos(phi.values))
    return float(np.sum(dens) * grid.dx)


# ------------------------------------------------------------ right-hand sides

def _background_values(grid: Grid, background: str) -> np.ndarray:
    if background == "kink":
        return kink(grid.x)
    if background == "vacuum":
        return np.zeros(grid.n_points)
    raise ValueError(f"unknown background {background!r}")


def nonlinear_remainder(u: np.ndarray, K: np.ndarray) -> np.ndarray:
    """-sin(K + u) + sin K + cos K u, i.e. everything beyond the linearization."""
    return -np.sin(K + u) + np.sin(K) + np.cos(K) * u


def rhs_u(u: RealField, background: str = "kink") -> RealField:
    """-sin(B + u) + sin B + u: forcing of the flat operator d_t^2 - d_x^2 + 1."""
    B = _background_values(u.grid, background)
    vals = -np.sin(B + u.values) + np.sin(B) + u.values
    return RealField(u.grid, vals, u.parity, check=False)


def rhs_w_values(w: np.ndarray, grid: Grid) -> np.ndarray:
    """D* N(I[w]) with N the exact remainder about the kink."""
    u = I_values(w, grid)
    return Dstar_values(nonlinear_remainder(u, kink(grid.x)), grid)


# ------------------------------------------------------------ state

@dataclass
class SimState:
    t: float
    u: RealField
    ut: RealField
    background: str = "kink"

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @cached_property
    def w(self) -> np.ndarray:
        return Dstar_values(self.u.values, self.grid)

    @cached_property
    def wt(self) -> np.ndarray:
        return Dstar_values(self.ut.values, self.grid)

    @cached_property
    def v_hat(self) -> np.ndarray:
        """Continuum-normalized coefficients of v = (w - i <D>^{-1} w_t) / 2."""
        g = self.grid
        return 0.5 * (fourier(self.w, g) - 1j * fourier(self.wt, g) / g.jbracket)

    @cached_property
    def v(self) -> np.ndarray:
        return inverse_fourier(self.v_hat, self.grid)

    @property
    def v_origin(self) -> complex:
        return complex(self.v[self.grid.origin])

    def boundary_leak(self) -> float:
        return max(boundary_leak(self.u.values), boundary_leak(self.ut.values))

    @classmethod
    def from_w(cls, t: float, w: np.ndarray, wt: np.ndarray, grid: Grid) -> "SimState":
        u = I_values(w, grid)
        ut = I_values(wt, grid)
        st = cls(t, RealField(grid, u, "none", check=False),
                 RealField(grid, ut, "none", check=False))
        # w is the evolved variable here; keep it rather than D*(I[w])
        st.__dict__["w"] = np.array(w, dtype=float)
        st.__dict__["wt"] = np.array(wt, dtype=float)
        return st


# ------------------------------------------------------------ stepper

class StrangStepper:
    """Strang splitting for (d_t^2 - d_x^2 + 1) q = F(q) on rfft coefficients.

    Each step is half a linear flow, a kick dt * F(q) to d_t q, and another
    half linear flow. The kick only changes d_t q, so its midpoint stage
    reproduces the frozen-q value and is evaluated once. Consecutive half
    flows are fused.

    formulation 'u': q = u, F = -sin(B + u) + sin B + u  (B = K or 0)
    formulation 'w': q = w, F = D* N(I[w])  (kink background only)
    nonlinearity 'off' keeps only the linear part of F.
    """

    def __init__(self, grid: Grid, dt: float, background: str = "kink",
                 formulation: str = "u", nonlinearity: str = "exact",
                 dealias_fraction: float = 2.0 / 3.0, parity: Optional[str] = "odd"):
        if dt <= 0 or not np.isfinite(dt):
            raise ValueError("dt must be positive")
        if formulation not in ("u", "w"):
            raise ValueError(f"unknown formulation {formulation!r}")
        if nonlinearity not in ("exact", "off"):
            raise ValueError(f"unknown nonlinearity {nonlinearity!r}")
        if formulation == "w" and background != "kink":
            raise ValueError("the w formulation is defined about the kink only")
        self.grid = grid
        self.dt = float(dt)
        self.background = background
        self.formulation = formulation
        self.nonlinearity = nonlinearity
        self.parity = parity
        n = grid.n_points
        k = 2.0 * np.pi * sfft.rfftfreq(n, d=grid.dx)
        self.omega = np.sqrt(1.0 + k * k)
        kmax = np.abs(grid.frequencies).max()
        mask = k <= dealias_fraction * kmax + 1e-12 * kmax
        mask[-1] = False  # Nyquist
        self.mask = mask
        self.B = _background_values(grid, background)
        self.sinB = np.sin(self.B)
        self.cosB = np.cos(self.B)
        self._half = self._flow_coeffs(0.5 * self.dt)
        self._full = self._flow_coeffs(self.dt)
        self.parity_drift = 0.0

    def _flow_coeffs(self, h: float):
        c = np.cos(self.omega * h)
        s = np.sin(self.omega * h)
        return c, s / self.omega, -self.omega * s

    @staticmethod
    def _flow(qh, ph, coeffs):
        c, a, b = coeffs
        return c * qh + a * ph, b * qh + c * ph

    def forcing(self, q: np.ndarray) -> np.ndarray:
        if self.formulation == "u":
            if self.nonlinearity == "off":
                return (1.0 - self.cosB) * q
            return -np.sin(self.B + q) + self.sinB + q
        if self.nonlinearity == "off":
            return np.zeros_like(q)
        return rhs_w_values(q, self.grid)

    def _project(self, qh, ph):
        if self.parity == "odd":
            self.parity_drift = max(self.parity_drift,
                                    float(np.max(np.abs(qh.real))) * 2.0 / self.grid.n_points)
            qh = 1j * qh.imag
            ph = 1j * ph.imag
        elif self.parity == "even":
            self.parity_drift = max(self.parity_drift,
                                    float(np.max(np.abs(qh.imag))) * 2.0 / self.grid.n_points)
            qh = qh.real.astype(complex)
            ph = ph.real.astype(complex)
        return qh, ph

    def _kick(self, qh, ph):
        n = self.grid.n_points
        q = sfft.irfft(qh, n)
        if self.formulation == "w" and self.nonlinearity == "off":
            return ph
        F = sfft.rfft(self.forcing(q))
        return ph + self.dt * self.mask * F

    def to_spectral(self, q: np.ndarray, p: np.ndarray):
        return sfft.rfft(q), sfft.rfft(p)

    def to_physical(self, qh, ph):
        n = self.grid.n_points
        return sfft.irfft(qh, n), sfft.irfft(ph, n)

    def advance(self, qh, ph, n_steps: int):
        """n_steps Strang steps from spectral data (fused half flows)."""
        if n_steps <= 0:
            return qh, ph
        qh, ph = self._flow(qh, ph, self._half)
        for i in range(n_steps):
            ph = self._kick(qh, ph)
            qh, ph = self._flow(qh, ph, self._half if i == n_steps - 1 else self._full)
            qh, ph = self._project(qh, ph)
        return qh, ph


def _state_parity(background: str) -> Optional[str]:
    return "odd" if background == "kink" else None


def step(state: SimState, dt: float, nonlinearity: str = "exact",
         dealias_fraction: float = 2.0 / 3.0, parity: Optional[str] = "odd") -> SimState:
    """One Strang step of the u equation."""
    st = StrangStepper(state.grid, dt, state.background, "u", nonlinearity,
                       dealias_fraction, parity if state.background == "kink" else None)
    qh, ph = st.to_spectral(state.u.values, state.ut.values)
    qh, ph = st.advance(qh, ph, 1)
    q, p = st.to_physical(qh, ph)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise SimulationError("non-finite values after step", state)
    par = state.u.parity
    return SimState(state.t + dt, RealField(state.grid, q, par, check=False),
                    RealField(state.grid, p, par, check=False), state.background)


# ------------------------------------------------------------ configuration

def _parse_length(value) -> float:
    if isinstance(value, bool):
        raise ConfigError("half_length must be a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = re.fullmatch(r"\s*([0-9.eE+-]*)\s*\*?\s*pi\s*", value)
        if m:
            coef = m.group(1)
            return (float(coef) if coef else 1.0) * np.pi
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"cannot parse half_length {value!r} (use a number or e.g. '80pi')")


@dataclass
class SimConfig:
    n_points: int = 8192
    half_length: float = 80.0 * np.pi
    dealias_fraction: float = 2.0 / 3.0
    dt: float = 0.0025
    t_final: float = 400.0
    snapshot_times: list = field(default_factory=lambda: [1, 2, 5, 10, 20, 50, 100, 200, 400])
    formulation: str = "u"
    nonlinearity: str = "exact"
    enforce_parity: bool = True
    family: str = "odd_gaussian"
    epsilon: float = 0.01
    sigma: float = 2.0
    diagnostics_every: float = 0.1
    probe_frequencies: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    delta: float = 0.01
    boundary_threshold: float = 1e-12
    light_cone_fraction: float = 0.8
    ode_residual_times: list = field(default_factory=list)
    log_snapshots: int = 0
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (self.dt > 0):
            raise ConfigError("time.dt must be positive")
        if not (self.t_final >= self.dt):
            raise ConfigError("time.t_final must be at least dt")
        if self.epsilon < 0:
            raise ConfigError("initial_data.epsilon must be non-negative")
        if not (0.0 < self.delta <= 0.1):
            raise ConfigError("diagnostics.delta must lie in (0, 1/10]")
        if not (0.0 < self.dealias_fraction <= 1.0):
            raise ConfigError("grid.dealias_fraction must lie in (0, 1]")
        if self.sigma <= 0:
            raise ConfigError("initial_data.sigma must be positive")
        if self.formulation not in ("u", "w"):
            raise ConfigError("time.formulation must be 'u' or 'w'")
        if self.nonlinearity not in ("exact", "off"):
            raise ConfigError("time.nonlinearity must be 'exact' or 'off'")
        if self.family not in INITIAL_FAMILIES:
            raise ConfigError(f"initial_data.family must be one of {sorted(INITIAL_FAMILIES)}")
        if self.diagnostics_every <= 0:
            raise ConfigError("diagnostics.every must be positive")
        make_grid(self.n_points, self.half_length)

    @property
    def grid(self) -> Grid:
        return make_grid(self.n_points, self.half_length)

    # section -> {json key: attribute}
    SECTIONS = {
        "grid": {"n_points": "n_points", "half_length": "half_length",
                 "dealias_fraction": "dealias_fraction"},
        "time": {"dt": "dt", "t_final": "t_final", "snapshot_times": "snapshot_times",
                 "formulation": "formulation", "nonlinearity": "nonlinearity",
                 "enforce_parity": "enforce_parity"},
        "initial_data": {"family": "family", "epsilon": "epsilon", "sigma": "sigma"},
        "diagnostics": {"every": "diagnostics_every", "probe_frequencies": "probe_frequencies",
                        "delta": "delta", "boundary_threshold": "boundary_threshold",
                        "light_cone_fraction": "light_cone_fraction",
                        "ode_residual_times": "ode_residual_times",
                        "log_snapshots": "log_snapshots"},
        "checks": None,
    }

    @classmethod
    def from_dict(cls, tree: dict) -> "SimConfig":
        if not isinstance(tree, dict):
            raise ConfigError("config root must be an object")
        kwargs = {}
        for section, body in tree.items():
            if section not in cls.SECTIONS:
                raise ConfigError(f"unknown section {section!r}")
            if not isinstance(body, dict):
                raise ConfigError(f"section {section!r} must be an object")
            if section == "checks":
                unknown = set(body) - set(CHECK_DEFAULTS)
                if unknown:
                    raise ConfigError(f"unknown key(s) in checks: {sorted(unknown)}")
                kwargs["checks"] = dict(body)
                continue
            table = cls.SECTIONS[section]
            for key, value in body.items():
                if key not in table:
                    raise ConfigError(f"unknown key {section}.{key}")
                kwargs[table[key]] = value
        if "half_length" in kwargs:
            kwargs["half_length"] = _parse_length(kwargs["half_length"])
        try:
            return cls(**kwargs)
        except TypeError as exc:  # pragma: no cover - guarded by the tables above
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {}
        for section, table in self.SECTIONS.items():
            if table is None:
                out[section] = {**CHECK_DEFAULTS, **self.checks}
                continue
            out[section] = {k: getattr(self, a) for k, a in table.items()}
        return out

    def check(self, name: str):
        return self.checks.get(name, CHECK_DEFAULTS[name])

    def all_snapshot_times(self) -> list[float]:
        """Requested times, log-spaced extras and residual triples, on the step lattice."""
        times = set(float(t) for t in self.snapshot_times)
        if self.log_snapshots > 0:
            times.update(np.geomspace(1.0, self.t_final, self.log_snapshots).tolist())
        for tc in self.ode_residual_times:
            d = residual_spacing(tc)
            times.update([tc - d, tc, tc + d])
        snapped = sorted({round(round(t / self.dt) * self.dt, 12) for t in times
                          if 0.0 <= t <= self.t_final + 1e-12})
        return snapped


CHECK_DEFAULTS = {
    "fit_window": [50.0, 250.0],
    "decay_band": [-0.55, -0.45],
    "stabilization_max": -0.15,
    "psi_band": [0.8, 1.2],
    "psi_frequencies": [0.0, 0.5, 1.0],
    "localdecay_band": [-1.1, -0.85],
    "reconstruction_time": 200.0,
    "reconstruction_ratio": 0.3,
    "cauchy_times": [5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
}


def residual_spacing(t: float) -> float:
    return max(0.5, t / 100.0)


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return SimConfig.from_dict(tree)


def odd_gaussian(x, epsilon: float, sigma: float):
    return epsilon * x * np.exp(-(x / sigma) ** 2)


INITIAL_FAMILIES = {"odd_gaussian": odd_gaussian}


def initial_state(config: SimConfig) -> SimState:
    grid = config.grid
    u0 = INITIAL_FAMILIES[config.family](grid.x, config.epsilon, config.sigma)
    u = RealField(grid, u0, "odd" if config.enforce_parity else "none")
    ut = RealField(grid, np.zeros(grid.n_points), u.parity, check=False)
    return SimState(0.0, u, ut, "kink")


# ------------------------------------------------------------ diagnostics

DIAGNOSTIC_COLUMNS = ("t", "sup_u", "sup_v", "H2_v", "L2_xv", "H1Lv_proxy", "energy",
                      "parity_drift", "boundary_leak", "localdecay_dxv", "profile_sup",
                      "sup_u_full")


def light_cone_mask(grid: Grid, t: float, fraction: float = 0.8) -> np.ndarray:
    reach = fraction * min(max(t, 0.0), grid.half_length - 5.0)
    return np.abs(grid.x) <= reach


def field_norms(state: SimState) -> dict:
    """Bootstrap-type norms of v in mixed physical/Fourier space."""
    g = state.grid
    vh = state.v_hat
    v = state.v
    x = g.x
    jb = g.jbracket
    dxi = g.dxi
    xv_hat = fourier(x * v, g)
    Lv_hat = jb * xv_hat - 1j * state.t * (1j * g.frequencies) * vh
    dv = inverse_fourier(1j * g.frequencies * vh, g)
    return {
        "sup_v": float(np.max(np.abs(v))),
        "H2_v": float(np.sqrt(np.sum(np.abs(jb**2 * vh) ** 2) * dxi)),
        "H1Lv": float(np.sqrt(np.sum(np.abs(jb * Lv_hat) ** 2) * dxi)),
        "xv_L2": float(np.sqrt(np.sum(np.abs(x * v) ** 2) * g.dx)),
        "profile_sup": float(np.max(jb**1.5 * np.abs(vh))),
        "localdecay_dxv": float(np.sqrt(np.sum(np.abs(dv) ** 2 / (1.0 + x * x)) * g.dx)),
    }


def diagnostics_row(state: SimState, parity_drift: float, fraction: float = 0.8) -> dict:
    g = state.grid
    norms = field_norms(state)
    gate = light_cone_mask(g, state.t, fraction)
    u = state.u.values
    phi = RealField(g, _background_values(g, state.background) + u, "none", check=False)
    return {
        "t": state.t,
        "sup_u": float(np.max(np.abs(u[gate]))) if gate.any() else 0.0,
        "sup_v": norms["sup_v"],
        "H2_v": norms["H2_v"],
        "L2_xv": norms["xv_L2"],
        "H1Lv_proxy": norms["H1Lv"],
        "energy": energy(phi, state.ut),
        "parity_drift": parity_drift,
        "boundary_leak": state.boundary_leak(),
        "localdecay_dxv": norms["localdecay_dxv"],
        "profile_sup": norms["profile_sup"],
        "sup_u_full": float(np.max(np.abs(u))),
    }


@dataclass
class ProbeRecord:
    t: float
    xi: np.ndarray
    F: np.ndarray       # <xi>^{3/2} f^(t, xi) at the probe frequencies
    v_origin: complex


class Sink:
    """Collects diagnostics rows, probe records and snapshots in memory."""

    def __init__(self):
        self.rows: list[dict] = []
        self.probes: list[ProbeRecord] = []
        self.snapshots: list[SimState] = []

    def record(self, row: dict) -> None:
        self.rows.append(row)

    def probe(self, rec: ProbeRecord) -> None:
        self.probes.append(rec)

    def snapshot(self, state: SimState) -> None:
        self.snapshots.append(state)


def probe_indices(grid: Grid, xis: Sequence[float]) -> np.ndarray:
    idx = []
    for q in xis:
        j = int(np.argmin(np.abs(grid.frequencies - q)))
        if abs(grid.frequencies[j] - q) > 1e-9 * max(1.0, abs(q)):
            raise ConfigError(f"probe frequency {q} is not on the frequency lattice")
        idx.append(j)
    return np.array(idx, dtype=int)


def simulate(config: SimConfig, sink: Optional[Sink] = None,
             initial: Optional[SimState] = None) -> SimState:
    """Evolve to config.t_final, emitting diagnostics, probes and snapshots."""
    sink = sink if sink is not None else Sink()
    state = initial if initial is not None else initial_state(config)
    grid = state.grid
    dt = config.dt
    parity = None
    if config.enforce_parity:
        parity = "odd" if config.formulation == "u" else "even"
    stepper = StrangStepper(grid, dt, "kink", config.formulation, config.nonlinearity,
                            config.dealias_fraction, parity)
    if config.enforce_parity:
        defect = parity_defect(state.u.values, grid, "odd")
        if defect > 1e-12 * max(1.0, float(np.max(np.abs(state.u.values)))):
            raise ConfigError("initial data is not odd; disable parity enforcement to proceed")
    n_total = int(round(config.t_final / dt))
    diag_every = max(1, int(round(config.diagnostics_every / dt)))
    snap_steps = {int(round(t / dt)) for t in config.all_snapshot_times()}
    event_steps = sorted({0, n_total} | set(range(0, n_total + 1, diag_every)) | snap_steps)
    event_steps = [s for s in event_steps if 0 <= s <= n_total]
    pidx = probe_indices(grid, config.probe_frequencies)
    jb = grid.jbracket

    if config.formulation == "u":
        qh, ph = stepper.to_spectral(state.u.values, state.ut.values)
    else:
        qh, ph = stepper.to_spectral(state.w, state.wt)

    def materialize(step_index: int) -> SimState:
        q, p = stepper.to_physical(qh, ph)
        t = step_index * dt
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise SimulationError(f"non-finite values at t = {t:.6g}", last_good)
        if config.formulation == "u":
            par = "odd" if config.enforce_parity else "none"
            return SimState(t, RealField(grid, q, par, check=False),
                            RealField(grid, p, par, check=False), "kink")
        return SimState.from_w(t, q, p, grid)

    last_good = state
    current = 0
    for target in event_steps:
        qh, ph = stepper.advance(qh, ph, target - current)
        current = target
        st = materialize(current)
        last_good = st
        if current % diag_every == 0 or current == n_total:
            sink.record(diagnostics_row(st, stepper.parity_drift, config.light_cone_fraction))
            stepper.parity_drift = 0.0
            F = jb[pidx] ** 1.5 * np.exp(-1j * st.t * jb[pidx]) * st.v_hat[pidx]
            sink.probe(ProbeRecord(st.t, grid.frequencies[pidx].copy(), F, st.v_origin))
        if current in snap_steps:
            sink.snapshot(st)
    return last_good


# ------------------------------------------------------------ nonlinearity pieces

@dataclass
class NonlinearityBreakdown:
    Q1: RealField
    Q2: RealField
    Q3: RealField
    Cnl: RealField
    Cl: RealField
    R1: RealField
    R2: RealField
    total: RealField
    exact_rhs: RealField

    def residual(self) -> float:
        return float(np.max(np.abs(self.total.values - self.exact_rhs.values)))

    def pieces(self) -> dict:
        return {k: getattr(self, k) for k in ("Q1", "Q2", "Q3", "Cnl", "Cl", "R1", "R2")}


_GL8_NODES, _GL8_WEIGHTS = np.polynomial.legendre.leggauss(8)
_R_NODES = 0.5 * (_GL8_NODES + 1.0)
_R_WEIGHTS = 0.5 * _GL8_WEIGHTS


def nonlinearity_breakdown_w(w: np.ndarray, grid: Grid) -> NonlinearityBreakdown:
    x = grid.x
    sech = 1.0 / np.cosh(x)
    th = np.tanh(x)
    K = kink(x)
    cs = coefficient_set(grid)
    u = I_values(w, grid)
    it = Itilde_values(derivative_values(w, grid), grid)

    Q1 = cs.alpha1.values * w**2
    Q2 = cs.alpha2.values * it * w
    Q3 = cs.alpha3.values * it**2
    Cnl = 0.5 * u**2 * w + th * u**3 / 3.0
    Cl = -(4.0 / 3.0) * sech**2 * th * u**3 - sech**2 * u**2 * w
    R1 = (4.0 * sech - 5.0 * sech**3) * u**4 / 12.0 + sech * th * u**3 * w / 3.0

    S0 = np.zeros_like(x)
    S1 = np.zeros_like(x)
    C0 = np.zeros_like(x)
    for r, wr in zip(_R_NODES, _R_WEIGHTS):
        arg = K + r * u
        s, c = np.sin(arg), np.cos(arg)
        S0 += wr * (1 - r) ** 4 * s
        S1 += wr * (1 - r) ** 4 * r * s
        C0 += wr * (1 - r) ** 4 * c
    R2 = (-(2.0 / 24.0) * sech * S0 * u**5
          + S1 * u**5 * w / 24.0
          + th * S1 * u**6 / 24.0
          - (5.0 / 24.0) * C0 * u**4 * w
          - th * C0 * u**5 / 6.0)
    total = Q1 + Q2 + Q3 + Cnl + Cl + R1 + R2
    exact = Dstar_values(nonlinear_remainder(u, K), grid)

    def F(a):
        return RealField(grid, a, "even", check=False)

    return NonlinearityBreakdown(F(Q1), F(Q2), F(Q3), F(Cnl), F(Cl), F(R1), F(R2), F(total),
                                 F(exact))


def nonlinearity_breakdown(state: SimState) -> NonlinearityBreakdown:
    return nonlinearity_breakdown_w(state.w, state.grid)


# ------------------------------------------------------------ normal form

def normal_form_B(v_at_0: complex, grid: Grid) -> np.ndarray:
    """alpha11 v0^2 + alpha12 |v0|^2 + alpha13 conj(v0)^2 (complex samples)."""
    cs = coefficient_set(grid)
    v0 = complex(v_at_0)
    return (cs.alpha11.values * v0**2 + cs.alpha12.values * abs(v0) ** 2
            + cs.alpha13.values * np.conj(v0) ** 2)


def normal_form_B_hat(v_at_0, xi) -> np.ndarray:
    """Transform of B(v, v); v_at_0 may be an array (broadcast against xi)."""
    from .closedform import normal_form_symbols

    a11, a12, a13 = normal_form_symbols(xi)
    v0 = np.asarray(v_at_0, dtype=complex)
    return a11 * v0**2 + a12 * np.abs(v0) ** 2 + a13 * np.conj(v0) ** 2


@dataclass
class RenormalizedQuadratics:
    Q11: np.ndarray   # complex
    Q12: RealField
    Q13: np.ndarray   # complex
    Q14: RealField


def renormalized_quadratics(state: SimState, before: SimState,
                            after: SimState) -> RenormalizedQuadratics:
    """Q11..Q14 with d/dt (e^{-it} v(t,0)) from a centred difference of stored states."""
    if not (before.t < state.t < after.t):
        raise ValueError("need states strictly before and after the evaluation time")
    grid = state.grid
    cs = coefficient_set(grid)
    jb = grid.jbracket

    def p(s: SimState) -> complex:
        return np.exp(-1j * s.t) * s.v_origin

    dp = (p(after) - p(before)) / (after.t - before.t)
    p0 = p(state)
    t = state.t
    Da11 = multiply_values(cs.alpha11.values, jb, grid)
    Da12 = multiply_values(cs.alpha12.values, jb, grid)
    Da13 = multiply_values(cs.alpha13.values, jb, grid)
    Q11 = 2.0 * Da11 * np.exp(2j * t) * dp * p0
    Q12 = 2.0 * Da12 * float(np.real(dp * np.conj(p0)))
    Q13 = 2.0 * Da13 * np.exp(-2j * t) * np.conj(dp) * np.conj(p0)
    w = state.w
    Q14 = cs.alpha1.values * (w**2 - w[grid.origin] ** 2)
    return RenormalizedQuadratics(Q11, RealField(grid, Q12, "even", check=False), Q13,
                                  RealField(grid, Q14, "even", check=False))


# ------------------------------------------------------------ validators

def breather_error(grid: Grid, beta: float, dt: float, periods: float = 1.0,
                   dealias_fraction: float = 2.0 / 3.0) -> float:
    """L2 distance to the exact breather after the given number of periods."""
    T = periods * breather_period(beta)
    n = int(round(T / dt))
    h = T / n
    st = StrangStepper(grid, h, "vacuum", "u", "exact", dealias_fraction, None)
    x = grid.x
    qh, ph = st.to_spectral(breather(0.0, x, beta), breather_t(0.0, x, beta))
    qh, ph = st.advance(qh, ph, n)
    q, _ = st.to_physical(qh, ph)
    return float(np.sqrt(np.sum((q - breather(T, x, beta)) ** 2) * grid.dx))


def moving_kink_error(grid: Grid, ell: float, a: float, t_final: float, dt: float) -> float:
    """Sup distance between the evolved perturbation and K_{ell,a}(t) - K."""
    x = grid.x
    st = StrangStepper(grid, dt, "kink", "u", "exact", 2.0 / 3.0, None)
    u0 = kink(x, ell, a, 0.0) - kink(x)
    u1 = kink_t(x, ell, a, 0.0)
    n = int(round(t_final / dt))
    qh, ph = st.to_spectral(u0, u1)
    qh, ph = st.advance(qh, ph, n)
    q, _ = st.to_physical(qh, ph)
    T = n * dt
    return float(np.max(np.abs(q - (kink(x, ell, a, T) - kink(x)))))


def config_hash(config: SimConfig) -> str:
    import hashlib

    blob = json.dumps(config.to_dict(), sort_keys=True, default=float).encode()
    return hashlib.sha256(blob).hexdigest()
