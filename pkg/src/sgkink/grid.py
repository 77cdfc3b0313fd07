"""Periodic lattice on [-L, L) and its Fourier dual.

Fourier coefficients follow the unitary convention

    g^(xi) = (2 pi)^(-1/2) * integral of exp(-i x xi) g(x) dx,

approximated on the lattice by the rectangle rule. With x_j = -L + j dx the
discrete sum picks up a factor (-1)^k relative to a plain FFT, which is folded
into ``Grid.shift``. A sample always sits exactly at x = 0 (index N/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal, Union

import numpy as np
import scipy.fft as sfft

Parity = Literal["odd", "even", "none"]

#: relative tolerance used when a parity tag is validated
PARITY_TOL = 1e-8

_SMALL_PRIMES = (2, 3, 5, 7)


def _is_smooth_number(n: int) -> bool:
    for p in _SMALL_PRIMES:
        while n % p == 0:
            n //= p
    return n == 1


def japanese(xi):
    """The bracket <xi> = sqrt(1 + xi^2)."""
    return np.sqrt(1.0 + np.asarray(xi, dtype=float) ** 2)


@dataclass(frozen=True)
class Grid:
    n_points: int
    half_length: float

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_points

    @property
    def dxi(self) -> float:
        return np.pi / self.half_length

    @property
    def origin(self) -> int:
        """Index of the sample at x = 0."""
        return self.n_points // 2

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_length + self.dx * np.arange(self.n_points)
        x[self.origin] = 0.0
        x.flags.writeable = False
        return x

    @cached_property
    def frequencies(self) -> np.ndarray:
        xi = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points) * self.dxi
        xi.flags.writeable = False
        return xi

    @cached_property
    def jbracket(self) -> np.ndarray:
        return japanese(self.frequencies)

    @cached_property
    def shift(self) -> np.ndarray:
        """(-1)^k: phase of exp(-i xi_k x_0) with x_0 = -L."""
        s = np.where(np.arange(self.n_points) % 2 == 0, 1.0, -1.0)
        s.flags.writeable = False
        return s

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index map j -> index of -x_j."""
        return (-np.arange(self.n_points)) % self.n_points

    @cached_property
    def nyquist(self) -> int:
        return self.n_points // 2

    def dealias_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Boolean mask keeping |xi| <= fraction * xi_max, Nyquist always dropped."""
        if not 0.0 < fraction <= 1.0:
            raise ValueError("dealias fraction must lie in (0, 1]")
        kmax = np.abs(self.frequencies).max()
        mask = np.abs(self.frequencies) <= fraction * kmax + 1e-12 * kmax
        mask[self.nyquist] = False
        return mask

    def sorted_frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending frequencies and the permutation that sorts them."""
        order = np.argsort(self.frequencies, kind="stable")
        return self.frequencies[order], order


def make_grid(n_points: int, half_length: float) -> Grid:
    """Build the lattice of ``n_points`` samples on [-half_length, half_length)."""
    if isinstance(n_points, bool) or int(n_points) != n_points:
        raise ValueError(f"n_points must be an integer, got {n_points!r}")
    n_points = int(n_points)
    if n_points < 16 or n_points % 2:
        raise ValueError(f"n_points must be even and >= 16, got {n_points}")
    if not _is_smooth_number(n_points):
        raise ValueError(f"n_points={n_points} is not a product of 2, 3, 5, 7")
    if not np.isfinite(half_length) or half_length <= 0:
        raise ValueError(f"half_length must be positive, got {half_length!r}")
    return Grid(n_points, float(half_length))


def parity_defect(values: np.ndarray, grid: Grid, parity: Parity) -> float:
    """Sup-norm of the component of ``values`` with the wrong parity."""
    if parity == "none":
        return 0.0
    mirrored = values[grid.mirror]
    if parity == "odd":
        bad = 0.5 * (values + mirrored)
    else:
        bad = 0.5 * (values - mirrored)
    # x = -L has no partner on the lattice; its mirror is itself
    bad = bad.copy()
    bad[0] = 0.0
    return float(np.max(np.abs(bad))) if bad.size else 0.0


@dataclass(frozen=True)
class RealField:
    grid: Grid
    values: np.ndarray
    parity: Parity = "none"
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has shape {vals.shape}, grid expects ({self.grid.n_points},)"
            )
        if self.parity not in ("odd", "even", "none"):
            raise ValueError(f"unknown parity {self.parity!r}")
        if self.check and self.parity != "none":
            scale = max(float(np.max(np.abs(vals))), 1e-300)
            defect = parity_defect(vals, self.grid, self.parity)
            if defect > PARITY_TOL * scale:
                raise ValueError(
                    f"field tagged {self.parity} has parity defect {defect:.3e}"
                )

    def __add__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        par = self.parity if self.parity == other.parity else "none"
        return RealField(self.grid, self.values + other.values, par, check=False)

    def __sub__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        par = self.parity if self.parity == other.parity else "none"
        return RealField(self.grid, self.values - other.values, par, check=False)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.dx))


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "coefficients", c)
        if c.shape != (self.grid.n_points,):
            raise ValueError(
                f"coefficients have shape {c.shape}, grid expects ({self.grid.n_points},)"
            )

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2) * self.grid.dxi))


def _same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError("fields live on different grids")


def fourier(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Continuum-normalized transform of real or complex samples."""
    values = np.asarray(values)
    if values.shape[-1] != grid.n_points:
        raise ValueError("length mismatch between samples and grid")
    return (grid.dx / np.sqrt(2.0 * np.pi)) * grid.shift * sfft.fft(values, axis=-1)


def inverse_fourier(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse of :func:`fourier`; returns complex samples."""
    coefficients = np.asarray(coefficients)
    if coefficients.shape[-1] != grid.n_points:
        raise ValueError("length mismatch between coefficients and grid")
    return sfft.ifft(coefficients * grid.shift, axis=-1) * (np.sqrt(2.0 * np.pi) / grid.dx)


def to_spectral(f: RealField) -> SpectralField:
    if f.values.shape != (f.grid.n_points,):
        raise ValueError("length mismatch between field and grid")
    return SpectralField(f.grid, fourier(f.values, f.grid))


def to_physical(g: SpectralField, parity: Parity = "none") -> RealField:
    vals = inverse_fourier(g.coefficients, g.grid).real
    return RealField(g.grid, vals, parity, check=False)


Symbol = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, complex, float]


def evaluate_symbol(symbol: Symbol, grid: Grid) -> np.ndarray:
    if callable(symbol):
        vals = np.asarray(symbol(grid.frequencies))
    else:
        vals = np.asarray(symbol)
    vals = np.broadcast_to(vals, (grid.n_points,)).astype(complex)
    if not np.all(np.isfinite(vals)):
        bad = grid.frequencies[~np.isfinite(vals)]
        raise ValueError(f"symbol is not finite at xi = {bad[:5]}")
    return vals


def apply_multiplier(g: SpectralField, symbol: Symbol) -> SpectralField:
    """Coefficientwise product with ``symbol(xi)``; the Nyquist mode is zeroed."""
    out = g.coefficients * evaluate_symbol(symbol, g.grid)
    out[g.grid.nyquist] = 0.0
    return SpectralField(g.grid, out)


def multiply_values(values: np.ndarray, symbol: np.ndarray, grid: Grid) -> np.ndarray:
    """Array-level multiplier for real samples: returns real samples."""
    c = sfft.fft(values)
    c *= symbol
    c[grid.nyquist] = 0.0
    return sfft.ifft(c).real


def derivative_values(values: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    """Spectral derivative of real samples (Nyquist dropped)."""
    return multiply_values(values, (1j * grid.frequencies) ** order, grid)


def derivative(f: RealField, order: int = 1) -> RealField:
    flip = {"odd": "even", "even": "odd", "none": "none"}
    par = f.parity if order % 2 == 0 else flip[f.parity]
    return RealField(f.grid, derivative_values(f.values, f.grid, order), par, check=False)


def parity_project(f: RealField, parity: Parity) -> RealField:
    """(f(x) -/+ f(-x))/2 for odd/even; identity for 'none'."""
    if parity == "none":
        return RealField(f.grid, f.values.copy(), "none", check=False)
    mirrored = f.values[f.grid.mirror]
    if parity == "odd":
        vals = 0.5 * (f.values - mirrored)
        vals[0] = 0.0  # x = -L is its own mirror image on the periodic lattice
    elif parity == "even":
        vals = 0.5 * (f.values + mirrored)
    else:
        raise ValueError(f"unknown parity {parity!r}")
    return RealField(f.grid, vals, parity, check=False)


def field_from_function(grid: Grid, fn: Callable[[np.ndarray], np.ndarray],
                        parity: Parity = "none") -> RealField:
    return RealField(grid, np.asarray(fn(grid.x), dtype=float), parity)
