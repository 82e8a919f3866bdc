"""Fourier grid on the torus, transforms, differentiation and Sobolev norms.

Coefficients use the normalized-measure convention

    coeffs(n) = (1/N) * sum_j f(x_j) exp(-i n x_j),

so that the mean-square of the samples equals the sum of squared coefficient
magnitudes.  All L2 norms in the package are taken with respect to the
normalized measure dx / (2 pi) on the torus, which makes the grid inner
product and the coefficient inner product coincide exactly.

Coefficient arrays are stored in numpy FFT order (0, 1, ..., N/2-1, -N/2,
..., -1); index N/2 holds the Nyquist mode -N/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

CONJ_SYMMETRY_TOL = 1e-9


def bracket(x):
    """Japanese bracket <x> = sqrt(1 + |x|^2)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


@dataclass(frozen=True)
class TorusGrid:
    """Equispaced collocation grid on [0, 2 pi) with N points."""

    N: int

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise TypeError("N must be an integer")
        if self.N % 2 != 0:
            raise ValueError("N must be even")
        if self.N < 4:
            raise ValueError("N must be at least 4")

    @cached_property
    def points(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.N) / self.N

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).round().astype(np.int64)

    @property
    def nyquist_index(self) -> int:
        return self.N // 2

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.N

    @cached_property
    def dealias_cutoff(self) -> int:
        """Largest K with 3K < N; products of modes |n| <= K alias only above K."""
        return (self.N - 1) // 3

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.abs(self.wavenumbers) <= self.dealias_cutoff

    def sorted_wavenumbers(self) -> np.ndarray:
        return np.sort(self.wavenumbers)


def make_grid(N: int) -> TorusGrid:
    return TorusGrid(int(N) if isinstance(N, np.integer) else N)


def is_conjugate_symmetric(coeffs: np.ndarray, tol: float = CONJ_SYMMETRY_TOL) -> bool:
    """Check coeffs(-n) == conj(coeffs(n)) with a real Nyquist mode."""
    mirrored = np.conj(np.roll(coeffs[::-1], 1))
    scale = max(1.0, float(np.max(np.abs(coeffs), initial=0.0)))
    return bool(np.max(np.abs(coeffs - mirrored), initial=0.0) <= tol * scale)


def symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Closest conjugate-symmetric coefficient array (the spectrum of the real part)."""
    mirrored = np.conj(np.roll(coeffs[::-1], 1))
    return 0.5 * (coeffs + mirrored)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """One periodic function stored through its Fourier coefficients.

    `real` fields are checked for conjugate symmetry on construction;
    `mean_zero` fields must have a vanishing zero mode.
    """

    grid: TorusGrid
    coeffs: np.ndarray
    real: bool = False
    mean_zero: bool = False
    _validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} coefficients, got shape {c.shape}")
        if self._validate:
            if not np.all(np.isfinite(c)):
                raise ValueError("coefficients must be finite")
            if self.real and not is_conjugate_symmetric(c):
                raise ValueError("real field requires conjugate-symmetric coefficients")
            if self.mean_zero and abs(c[0]) > 1e-12 * max(1.0, float(np.max(np.abs(c)))):
                raise ValueError("mean-zero field requires coeffs(0) = 0")
        c = c.copy()
        if self.real:
            c[self.grid.nyquist_index] = c[self.grid.nyquist_index].real
        if self.mean_zero:
            c[0] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs: np.ndarray, real=None, mean_zero=None) -> "SpectralField":
        return SpectralField(
            self.grid,
            coeffs,
            self.real if real is None else real,
            self.mean_zero if mean_zero is None else mean_zero,
        )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(
            self.grid,
            self.coeffs + other.coeffs,
            self.real and other.real,
            self.mean_zero and other.mean_zero,
        )

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(
            self.grid,
            self.coeffs - other.coeffs,
            self.real and other.real,
            self.mean_zero and other.mean_zero,
        )

    def __mul__(self, scalar) -> "SpectralField":
        scalar = complex(scalar)
        keep_real = self.real and scalar.imag == 0.0
        return SpectralField(self.grid, self.coeffs * scalar, keep_real, self.mean_zero)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self * -1.0

    @property
    def mean(self) -> complex:
        """Average over the torus, i.e. the zero mode."""
        return complex(self.coeffs[0])

    def samples(self) -> np.ndarray:
        return to_physical(self)

    def norm(self) -> float:
        return l2_norm(self)


def _check_same_grid(f: SpectralField, g: SpectralField):
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def to_spectral(samples, grid: TorusGrid, real: bool | None = None, mean_zero: bool = False) -> SpectralField:
    """Coefficients of grid samples; `real` defaults to whether the samples are real."""
    s = np.asarray(samples)
    if s.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} samples, got shape {s.shape}")
    if real is None:
        real = not np.iscomplexobj(s)
    if real:
        s = np.real(s)
    coeffs = np.fft.fft(s) / grid.N
    if mean_zero:
        coeffs[0] = 0.0
    return SpectralField(grid, coeffs, real=real, mean_zero=mean_zero, _validate=False)


def to_physical(f: SpectralField) -> np.ndarray:
    s = np.fft.ifft(f.coeffs) * f.grid.N
    return s.real.copy() if f.real else s


def derivative_multiplier(grid: TorusGrid, p: int) -> np.ndarray:
    """Symbol (i n)^p, with the Nyquist mode removed for odd p."""
    if p < 0:
        raise ValueError("derivative order must be nonnegative")
    m = (1j * grid.wavenumbers.astype(float)) ** p
    if p % 2 == 1:
        m[grid.nyquist_index] = 0.0
    return m


def derivative(f: SpectralField, p: int = 1) -> SpectralField:
    m = derivative_multiplier(f.grid, p)
    mean_zero = f.mean_zero or p >= 1
    return SpectralField(f.grid, f.coeffs * m, real=f.real, mean_zero=mean_zero, _validate=False)


def fractional_multiplier(grid: TorusGrid, r: float) -> np.ndarray:
    """|n|^r for n != 0 and 1 at n = 0; Nyquist dropped for non-integer r."""
    n = np.abs(grid.wavenumbers).astype(float)
    m = np.ones_like(n)
    nz = n != 0
    m[nz] = n[nz] ** r
    if float(r) != int(r):
        m[grid.nyquist_index] = 0.0
    return m


def fractional_D(f: SpectralField, r: float) -> SpectralField:
    m = fractional_multiplier(f.grid, r)
    return SpectralField(f.grid, f.coeffs * m, real=f.real, mean_zero=f.mean_zero, _validate=False)


def sobolev_norm(f: SpectralField, s: float = 0.0) -> float:
    w = bracket(f.grid.wavenumbers) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def l2_norm(f: SpectralField) -> float:
    return float(np.linalg.norm(f.coeffs))


def inner(f: SpectralField, g: SpectralField) -> complex:
    """L2 inner product <f, g> = mean(f conj(g)), linear in the first slot."""
    _check_same_grid(f, g)
    return complex(np.vdot(g.coeffs, f.coeffs))


def project_zero_mean(f: SpectralField) -> SpectralField:
    c = np.array(f.coeffs)
    c[0] = 0.0
    return SpectralField(f.grid, c, real=f.real, mean_zero=True, _validate=False)


def integral(f: SpectralField) -> complex:
    """Integral over [0, 2 pi) with respect to Lebesgue measure."""
    return 2.0 * np.pi * complex(f.coeffs[0])


def zeros(grid: TorusGrid, real: bool = False, mean_zero: bool = False) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.N, dtype=complex), real=real, mean_zero=mean_zero)


def resample(f: SpectralField, grid: TorusGrid) -> SpectralField:
    """Zero-pad or truncate the spectrum onto another grid."""
    out = np.zeros(grid.N, dtype=complex)
    keep = min(f.grid.N, grid.N) // 2 - 1
    n = np.arange(-keep, keep + 1)
    out[n % grid.N] = f.coeffs[n % f.grid.N]
    return SpectralField(grid, out, real=f.real, mean_zero=f.mean_zero, _validate=False)
