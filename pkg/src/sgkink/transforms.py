"""Factorization operators D, D*, their right inverse I, and related identities.

D = d/dx - tanh x,  D* = -d/dx - tanh x,
D D* = -d^2/dx^2 - 2 sech^2 x + 1,  D* D = -d^2/dx^2 + 1,
I[g](x) = -sech x * int_0^x cosh(y) g(y) dy,
It[dg](x) = sech x * int_0^x sinh(y) dg(y) dy.

Cumulative integrals are anchored at the lattice point x = 0. Products such as
cosh(y) sech(x) are never formed directly: each side of the origin is handled
as exp(y - x) times bounded factors and the exponential is applied through a
first-order recursion, so nothing overflows for any domain size.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.signal import lfilter

from .grid import (
    Grid,
    RealField,
    derivative_values,
    multiply_values,
)

#: default threshold for |tanh * f| at the periodic wrap point
BOUNDARY_TOL = 1e-12
#: stencil width of the interval quadrature (order = width)
STENCIL = 10


@dataclass(frozen=True)
class OperatorReport:
    name: str
    residual_sup: float
    residual_l2: float
    tolerance: float
    passed: bool

    @classmethod
    def from_residual(cls, name: str, residual: np.ndarray, tolerance: float,
                      dx: float = 1.0) -> "OperatorReport":
        residual = np.asarray(residual)
        sup = float(np.max(np.abs(residual))) if residual.size else 0.0
        l2 = float(np.sqrt(np.sum(np.abs(residual) ** 2) * dx))
        return cls(name, sup, l2, float(tolerance), bool(sup <= tolerance))

    @classmethod
    def from_value(cls, name: str, value: float, tolerance: float) -> "OperatorReport":
        value = abs(float(value))
        return cls(name, value, value, float(tolerance), bool(value <= tolerance))

    def as_dict(self) -> dict:
        return asdict(self)


class BoundaryLeakError(RuntimeError):
    """A tanh product is not negligible at the periodic wrap point."""


# ---------------------------------------------------------------- quadrature

@lru_cache(maxsize=None)
def _interval_weights(offsets: tuple[int, ...]) -> np.ndarray:
    """Weights w_s with int_0^1 p(t) dt = sum_s w_s p(s) for deg p < len(offsets)."""
    w = []
    for s in offsets:
        # Lagrange basis polynomial for node s, integrated exactly over [0, 1]
        coeffs = [Fraction(1)]
        denom = Fraction(1)
        for r in offsets:
            if r == s:
                continue
            coeffs = [Fraction(0)] + coeffs  # multiply by t
            for i in range(len(coeffs) - 1):
                coeffs[i] -= r * coeffs[i + 1]
            denom *= s - r
        integral = sum(c / (i + 1) for i, c in enumerate(coeffs))
        w.append(float(integral / denom))
    return np.array(w)


def _interval_integrals(q: np.ndarray, first: int, h: float, growth: float = 0.0) -> np.ndarray:
    """Integrals of the interpolant of q over [y_i, y_{i+1}] for i >= first.

    ``q`` holds samples on a uniform mesh y_0 < y_1 < ...; the result has one
    entry per interval starting at ``first``. With ``growth`` = c the integrand
    is exp(c (y - y_i)) q(y), i.e. the samples are rescaled relative to the
    left end of each interval before interpolation.
    """
    n = q.size
    m = STENCIL
    half = m // 2
    n_int = n - 1 - first
    out = np.empty(n_int)
    if n_int <= 0:
        return out[:0]
    # interior: nodes i-half+1 .. i+half
    centred = tuple(range(-half + 1, half + 1))
    w = _interval_weights(centred) * np.exp(growth * h * np.array(centred))
    lo = max(first, half - 1)
    hi = n - half  # last i with i + half <= n - 1
    if hi > lo:
        # out[i] = sum_s w_s q[i + s]
        acc = np.zeros(hi - lo)
        for s, ws in zip(centred, w):
            acc += ws * q[lo + s: hi + s]
        out[lo - first: hi - first] = acc
    # edges: shift the stencil inwards
    for i in list(range(first, min(lo, n - 1))) + list(range(max(hi, first), n - 1)):
        start = min(max(i - half + 1, 0), n - m)
        offs = tuple(range(start - i, start - i + m))
        ws = _interval_weights(offs) * np.exp(growth * h * np.array(offs))
        out[i - first] = np.dot(ws, q[start: start + m])
    return out * h


def _one_sided(q: np.ndarray, h: float, rate: float) -> np.ndarray:
    """E_j = int_0^{y_j} exp(-rate (y_j - y)) q(y) dy on y_j = j h, j >= 0.

    ``q`` must carry ``pad`` = STENCIL//2 - 1 extra samples at y < 0 in front.
    """
    pad = STENCIL // 2 - 1
    d = _interval_integrals(q, pad, h, growth=rate)
    out = np.zeros(q.size - pad)
    if rate == 0.0:
        out[1:] = np.cumsum(d)
    else:
        r = np.exp(-rate * h)
        # F_j = r F_{j-1} + d_j ;  E_{j+1} = r F_j
        F = lfilter([1.0], [1.0, -r], d)
        out[1:] = r * F
    return out


def _mirror_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Samples of y -> f(-y) on the lattice (the x = -L sample maps to +L = -L)."""
    return values[grid.mirror]


def _assemble(grid: Grid, pos_vals: np.ndarray, neg_vals: np.ndarray) -> np.ndarray:
    """Combine one-sided results into a lattice array (x = -L taken from the negative side)."""
    o = grid.origin
    n = grid.n_points
    out = np.empty(n)
    out[o:] = pos_vals[: n - o]
    # neg_vals[k] belongs to x = -k dx, k = 0..o ; index o - k
    out[: o + 1][::-1] = neg_vals[: o + 1]
    return out


def cumulative_from_origin(g: RealField, weight: Optional[Callable[[np.ndarray], np.ndarray]] = None
                           ) -> RealField:
    """x -> int_0^x weight(y) g(y) dy (negative for x < 0 when the integrand is positive)."""
    grid = g.grid
    vals = g.values if weight is None else g.values * weight(grid.x)
    out = cumulative_values(vals, grid)
    par = {"odd": "even", "even": "odd", "none": "none"}[g.parity] if weight is None else "none"
    return RealField(grid, out, par, check=False)


def cumulative_values(vals: np.ndarray, grid: Grid) -> np.ndarray:
    vals = np.asarray(vals, dtype=float)
    o = grid.origin
    pad = STENCIL // 2 - 1
    refl = _extend_reflected(_mirror_values(vals, grid), vals, grid)
    E_pos = _one_sided(vals[o - pad:], grid.dx, 0.0)
    E_neg = _one_sided(refl[o - pad:], grid.dx, 0.0)
    return _assemble(grid, E_pos, -E_neg)


def _extend_reflected(refl: np.ndarray, vals: np.ndarray, grid: Grid) -> np.ndarray:
    """Reflected samples on an array long enough to reach x = -L from the origin.

    Index o + k holds f(-k dx) for k = -pad..o, where o = N/2. This needs one
    sample more than the lattice on the far end, namely f(-L) itself.
    """
    o = grid.origin
    ext = np.empty(grid.n_points + 1)
    ext[: grid.n_points] = refl
    ext[grid.n_points] = vals[0]  # f(-(o) dx) = f(-L)
    return ext


def _scaled_kernel_integral(vals: np.ndarray, grid: Grid, kind: str) -> np.ndarray:
    """sech(x) int_0^x K(y) g(y) dy with K = cosh ('c') or sinh ('s').

    For x, y >= 0: sech(x) cosh(y) = exp(y - x) (1 + e^{-2y}) / (1 + e^{-2x})
    and sech(x) sinh(y) = exp(y - x) (1 - e^{-2y}) / (1 + e^{-2x}).
    """
    o = grid.origin
    n = grid.n_points
    pad = STENCIL // 2 - 1
    sign = 1.0 if kind == "c" else -1.0

    def one_side(q_full: np.ndarray) -> np.ndarray:
        # q_full[o + k] = g(+-k dx); build y-samples for k = -pad..end
        y = grid.dx * np.arange(-pad, q_full.size - o)
        q = q_full[o - pad:] * (1.0 + sign * np.exp(-2.0 * y))
        E = _one_sided(q, grid.dx, 1.0)
        yy = grid.dx * np.arange(E.size)
        return E / (1.0 + np.exp(-2.0 * yy))

    pos = one_side(vals)
    neg = one_side(_extend_reflected(_mirror_values(vals, grid), vals, grid))
    # negative side: x = -X, y = -Y:  sech(X) int_0^{-X} K(y) g(y) dy
    #   = -sech(X) int_0^X K(-Y) g(-Y) dY, and K(-Y) = sign * K(Y)
    return _assemble(grid, pos, -sign * neg)


def I_values(vals: np.ndarray, grid: Grid) -> np.ndarray:
    return -_scaled_kernel_integral(vals, grid, "c")


def Itilde_values(dvals: np.ndarray, grid: Grid) -> np.ndarray:
    return _scaled_kernel_integral(dvals, grid, "s")


# ------------------------------------------------------------- D, D*, I, It

def _tanh(grid: Grid) -> np.ndarray:
    return np.tanh(grid.x)


def boundary_leak(vals: np.ndarray, width: int = 2) -> float:
    """Largest |f| over the samples adjacent to the periodic wrap point."""
    return float(max(np.max(np.abs(vals[:width])), np.max(np.abs(vals[-width:]))))


def _check_boundary(vals: np.ndarray, tol: Optional[float], name: str) -> None:
    if tol is None:
        return
    leak = boundary_leak(vals)
    if leak > tol:
        raise BoundaryLeakError(
            f"{name}: |f| = {leak:.3e} at x = +-L exceeds {tol:.1e}; "
            "the tanh factor jumps there"
        )


def Dstar_values(vals: np.ndarray, grid: Grid, boundary_tol: Optional[float] = None) -> np.ndarray:
    _check_boundary(vals, boundary_tol, "D*")
    return -derivative_values(vals, grid) - _tanh(grid) * vals


def D_values(vals: np.ndarray, grid: Grid, boundary_tol: Optional[float] = None) -> np.ndarray:
    _check_boundary(vals, boundary_tol, "D")
    return derivative_values(vals, grid) - _tanh(grid) * vals


_FLIP = {"odd": "even", "even": "odd", "none": "none"}


def apply_D(f: RealField, boundary_tol: Optional[float] = BOUNDARY_TOL) -> RealField:
    return RealField(f.grid, D_values(f.values, f.grid, boundary_tol), _FLIP[f.parity], check=False)


def apply_Dstar(f: RealField, boundary_tol: Optional[float] = BOUNDARY_TOL) -> RealField:
    return RealField(f.grid, Dstar_values(f.values, f.grid, boundary_tol), _FLIP[f.parity],
                     check=False)


def apply_I(g: RealField) -> RealField:
    return RealField(g.grid, I_values(g.values, g.grid), _FLIP[g.parity], check=False)


def apply_Itilde(dg: RealField) -> RealField:
    """sech(x) int_0^x sinh(y) dg(y) dy; ``dg`` is expected to be a derivative field."""
    return RealField(dg.grid, Itilde_values(dg.values, dg.grid), _FLIP[dg.parity], check=False)


# ------------------------------------------------------------ Z-action

def kernel_K1(x, y):
    return -np.tanh(x) / np.cosh(x) * np.sinh(y)


def kernel_K2(x, y):
    return -np.cosh(x - y) * y / np.cosh(x) ** 2 - np.cosh(y) * (x - y) / np.cosh(x)


def kernel_K3(x, y):
    return np.tanh(x) / np.cosh(x) * np.cosh(y)


def kernel_K4(x, y):
    return -np.sinh(x - y) * y / np.cosh(x) ** 2 + np.sinh(y) * (x - y) / np.cosh(x)


# The kernels are finite sums of separable terms a(x) b(y) with
# b in {cosh, sinh} times a polynomial; written that way they reduce to the
# two scaled primitives C[h] = sech(x) int cosh h and S[h] = sech(x) int sinh h:
#   K1 = -tanh(x) sech(x) sinh(y)
#   K2 = -x sech(x) cosh(y) + tanh(x) sech(x) sinh(y) y
#   K3 =  tanh(x) sech(x) cosh(y)
#   K4 = -tanh(x) sech(x) cosh(y) y + x sech(x) sinh(y)

def _C(vals, grid):
    return _scaled_kernel_integral(vals, grid, "c")


def _S(vals, grid):
    return _scaled_kernel_integral(vals, grid, "s")


def z_action_I(v: RealField, vt: RealField, t: float) -> RealField:
    """Z(I[v]) with Z = t d/dx + x d/dt, via the kernel representation."""
    grid = v.grid
    x = grid.x
    th = np.tanh(x)
    zv = t * derivative_values(v.values, grid) + x * vt.values
    out = -t * v.values / np.cosh(x) ** 2
    out += -th * _S(zv, grid)                       # int K1 (Zv)
    out += -x * _C(vt.values, grid) + th * _S(x * vt.values, grid)  # int K2 vt
    return RealField(grid, out, "none", check=False)


def z_action_Itilde(vx: RealField, vtx: RealField, t: float) -> RealField:
    """Z(It[dv]) given dv = vx and its time derivative vtx."""
    grid = vx.grid
    x = grid.x
    th = np.tanh(x)
    zdv = t * derivative_values(vx.values, grid) + x * vtx.values
    out = t * th / np.cosh(x) * vx.values[grid.origin]
    out += th * _C(zdv, grid)                       # int K3 (Z dv)
    out += -th * _C(x * vtx.values, grid) + x * _S(vtx.values, grid)  # int K4 d_t dv
    return RealField(grid, out, "none", check=False)


def z_action_I_direct(v: RealField, vt: RealField, t: float) -> RealField:
    """Oracle: t d/dx I[v] + x I[vt] using spectral d/dx."""
    grid = v.grid
    out = t * derivative_values(I_values(v.values, grid), grid) + grid.x * I_values(vt.values, grid)
    return RealField(grid, out, "none", check=False)


def z_action_Itilde_direct(vx: RealField, vtx: RealField, t: float) -> RealField:
    grid = vx.grid
    out = (t * derivative_values(Itilde_values(vx.values, grid), grid)
           + grid.x * Itilde_values(vtx.values, grid))
    return RealField(grid, out, "none", check=False)


# ------------------------------------------------------------ verifiers

def random_bandlimited(grid: Grid, rng: np.random.Generator, parity: str = "none",
                       n_modes: int = 12, width: float = 4.0, kmax: float = 3.0) -> np.ndarray:
    """Smooth decaying test field: random trigonometric sum under a Gaussian."""
    x = grid.x
    k = rng.uniform(0.0, kmax, n_modes)
    a = rng.normal(size=n_modes)
    b = rng.normal(size=n_modes)
    c = rng.uniform(-1.0, 1.0)
    s = 0.0
    if parity in ("even", "none"):
        s = s + (a[:, None] * np.cos(k[:, None] * (x - (0 if parity == "even" else c)))).sum(0)
    if parity in ("odd", "none"):
        s = s + (b[:, None] * np.sin(k[:, None] * x)).sum(0)
    return s * np.exp(-(x / width) ** 2) / np.sqrt(n_modes)


def verify_factorization(grid: Grid, n_fields: int = 50, seed: int = 0,
                         tol: float = 1e-9) -> list[OperatorReport]:
    rng = np.random.default_rng(seed)
    x = grid.x
    xi2 = grid.frequencies**2
    worst_a = np.zeros(1)
    worst_b = np.zeros(1)
    for _ in range(n_fields):
        g = random_bandlimited(grid, rng)
        lhs_a = D_values(Dstar_values(g, grid), grid)
        rhs_a = multiply_values(g, xi2, grid) - 2.0 * g / np.cosh(x) ** 2 + g
        lhs_b = Dstar_values(D_values(g, grid), grid)
        rhs_b = multiply_values(g, xi2, grid) + g
        ra, rb = lhs_a - rhs_a, lhs_b - rhs_b
        if np.max(np.abs(ra)) > np.max(np.abs(worst_a)):
            worst_a = ra
        if np.max(np.abs(rb)) > np.max(np.abs(worst_b)):
            worst_b = rb
    return [
        OperatorReport.from_residual("factorization_DDstar", worst_a, tol, grid.dx),
        OperatorReport.from_residual("factorization_DstarD", worst_b, tol, grid.dx),
    ]


def verify_right_inverse(grid: Grid, n_fields: int = 50, seed: int = 1,
                         tol: float = 1e-9) -> list[OperatorReport]:
    rng = np.random.default_rng(seed)
    worst = {"inv": np.zeros(1), "rec": np.zeros(1), "ibp": np.zeros(1)}
    th = np.tanh(grid.x)
    for _ in range(n_fields):
        g = random_bandlimited(grid, rng, "even")
        u = random_bandlimited(grid, rng, "odd")
        h = random_bandlimited(grid, rng)
        res = {
            "inv": Dstar_values(I_values(g, grid), grid) - g,
            "rec": I_values(Dstar_values(u, grid), grid) - u,
            "ibp": I_values(h, grid) - (-th * h + Itilde_values(derivative_values(h, grid), grid)),
        }
        for key, arr in res.items():
            if np.max(np.abs(arr)) > np.max(np.abs(worst[key])):
                worst[key] = arr
    worst_inv, worst_rec, worst_ibp = worst["inv"], worst["rec"], worst["ibp"]
    return [
        OperatorReport.from_residual("right_inverse", worst_inv, tol, grid.dx),
        OperatorReport.from_residual("reconstruction_odd", worst_rec, tol, grid.dx),
        OperatorReport.from_residual("integration_by_parts", worst_ibp, tol, grid.dx),
    ]


def verify_commutators(grid: Grid, seed: int = 2, t: float = 3.0,
                       tol: float = 1e-9) -> list[OperatorReport]:
    """[x, <D>^k] = k <D>^{k-2} d/dx for k = -1, 0, 1, 2 and [<D>, L] = -d/dx."""
    rng = np.random.default_rng(seed)
    g = random_bandlimited(grid, rng)
    x = grid.x
    jb = grid.jbracket
    ik = 1j * grid.frequencies

    def mult(vals, sym):
        return multiply_values(vals, sym, grid)

    reports = []
    for k in (-1, 0, 1, 2):
        lhs = x * mult(g, jb**k) - mult(x * g, jb**k)
        rhs = k * mult(g, jb ** (k - 2) * ik)
        reports.append(OperatorReport.from_residual(f"commutator_x_D^{k}", lhs - rhs, tol, grid.dx))

    # L = <D> x - i t d/dx acting on complex fields; split real/imag parts
    def L_op(vals):
        return _cmult(x * vals, jb, grid) - 1j * t * _cmult(vals, ik, grid)

    gc = g + 1j * random_bandlimited(grid, rng)
    # [<D>, L] g = <D> L g - L <D> g
    lhs = _cmult(L_op(gc), jb, grid) - L_op(_cmult(gc, jb, grid))
    rhs = -_cmult(gc, ik, grid)
    reports.append(OperatorReport.from_residual("commutator_D_L", lhs - rhs, tol, grid.dx))
    zero = np.zeros(grid.n_points)
    reports.append(OperatorReport.from_residual(
        "commutator_zero_field", x * mult(zero, jb**2) - mult(x * zero, jb**2), tol, grid.dx))
    return reports


def _cmult(vals: np.ndarray, sym: np.ndarray, grid: Grid) -> np.ndarray:
    from scipy import fft as sfft
    c = sfft.fft(vals) * sym
    c[grid.nyquist] = 0.0
    return sfft.ifft(c)


def verify_z_action(grid: Grid, t: float = 2.0, seed: int = 3,
                    tol: float = 1e-8) -> list[OperatorReport]:
    rng = np.random.default_rng(seed)
    v = random_bandlimited(grid, rng, "even")
    vt = random_bandlimited(grid, rng, "even")
    V, VT = RealField(grid, v), RealField(grid, vt)
    a = z_action_I(V, VT, t).values - z_action_I_direct(V, VT, t).values
    vx = derivative_values(v, grid)
    vtx = derivative_values(vt, grid)
    VX, VTX = RealField(grid, vx), RealField(grid, vtx)
    b = z_action_Itilde(VX, VTX, t).values - z_action_Itilde_direct(VX, VTX, t).values
    return [
        OperatorReport.from_residual("z_action_I", a, tol, grid.dx),
        OperatorReport.from_residual("z_action_Itilde", b, tol, grid.dx),
    ]
