"""Actuator profiles, the mean-preserving control operator G, linear phases.

The actuator region omega is an arc of the torus given by its center and
half-width.  Two profiles live on it:

* ``a**2`` is the Schrödinger damping weight.  It equals ``eta`` plus a
  smooth bump rising to ``a2_peak`` at the arc center and vanishes off the
  arc, so ``a**2 >= eta`` on omega and its support is the closed arc.
* ``g`` is a smooth nonnegative bump supported on the arc and normalized to
  unit Lebesgue integral on the grid, which makes ``G h = g (h - int g h)``
  mean-zero and self-adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spectral import SpectralField, TorusGrid, bracket, make_grid, to_spectral

DEALIAS_RULES = ("two-thirds", "none")


def smooth_bump(s):
    """exp(1 - 1/(1 - s^2)) on |s| < 1, zero elsewhere; equals 1 at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def arc_offset(x, center: float):
    """Signed periodic distance from `center`, in [-pi, pi)."""
    return (np.asarray(x, dtype=float) - center + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True, eq=False)
class ActuatorProfile:
    """Damping weight a^2 and control window g on an arc of the torus."""

    grid: TorusGrid
    center: float
    half_width: float
    eta: float
    a2_peak: float
    a2_samples: np.ndarray
    g_samples: np.ndarray

    @property
    def a(self) -> SpectralField:
        return to_spectral(np.sqrt(self.a2_samples), self.grid, real=True)

    @property
    def g(self) -> SpectralField:
        return to_spectral(self.g_samples, self.grid, real=True)

    @cached_property
    def in_arc(self) -> np.ndarray:
        """Grid points lying strictly inside omega."""
        return np.abs(arc_offset(self.grid.points, self.center)) < self.half_width

    def to_dict(self) -> dict:
        return {
            "N": self.grid.N,
            "center": self.center,
            "half_width": self.half_width,
            "eta": self.eta,
            "a2_peak": self.a2_peak,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActuatorProfile":
        return build_profiles(
            make_grid(int(d["N"])),
            center=float(d["center"]),
            half_width=float(d["half_width"]),
            eta=float(d["eta"]),
            a2_peak=float(d.get("a2_peak", 1.0)),
        )


def build_profiles(
    grid: TorusGrid,
    center: float = np.pi,
    half_width: float = np.pi / 4,
    eta: float = 0.5,
    a2_peak: float = 1.0,
) -> ActuatorProfile:
    """Profiles on the arc (center - half_width, center + half_width)."""
    if not 0.0 < half_width < np.pi:
        raise ValueError("half_width must lie in (0, pi)")
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    if a2_peak < eta:
        raise ValueError("a2_peak must be at least eta")
    center = float(center) % (2.0 * np.pi)
    s = arc_offset(grid.points, center) / half_width
    bump = smooth_bump(s)
    inside = np.abs(s) < 1.0
    if not np.any(bump > 0.0):
        raise ValueError("arc too narrow to contain an interior grid point")
    a2 = np.where(inside, eta + (a2_peak - eta) * bump, 0.0)
    g = bump / (grid.dx * np.sum(bump))
    for arr in (a2, g):
        arr.setflags(write=False)
    return ActuatorProfile(grid, center, float(half_width), float(eta), float(a2_peak), a2, g)


def g_average(g: np.ndarray, h: np.ndarray, dx: float):
    """Grid quadrature of the Lebesgue integral of g h (vectorized over leading axes)."""
    return dx * np.sum(g * h, axis=-1, keepdims=True)


def apply_G_samples(g: np.ndarray, h: np.ndarray, dx: float) -> np.ndarray:
    """G h = g (h - int g h) on grid samples; h may carry leading batch axes."""
    return g * (h - g_average(g, h, dx))


def apply_G(profile: ActuatorProfile, h: SpectralField) -> SpectralField:
    if not h.real:
        raise ValueError("G acts on real fields")
    out = apply_G_samples(profile.g_samples, h.samples(), profile.grid.dx)
    return to_spectral(out, profile.grid, real=True, mean_zero=True)


def apply_G_star(profile: ActuatorProfile, h: SpectralField) -> SpectralField:
    """Adjoint of G in L2; G is self-adjoint once g has unit integral."""
    return apply_G(profile, h)


def apply_damping(profile: ActuatorProfile, u: SpectralField) -> SpectralField:
    """Pointwise product a^2 u."""
    return to_spectral(profile.a2_samples * u.samples(), profile.grid, real=u.real)


@dataclass(frozen=True)
class SystemParams:
    """Coefficients of the coupled system plus discretization switches.

    ``coupling`` toggles the first-order cross terms, ``quadratic`` the
    KdV nonlinearity; both default on and exist for linear test problems.
    """

    beta: float
    mu: float
    profile: ActuatorProfile
    dealias: str = "two-thirds"
    coupling: bool = True
    quadratic: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.beta) and np.isfinite(self.mu)):
            raise ValueError("beta and mu must be finite")
        if self.dealias not in DEALIAS_RULES:
            raise ValueError(f"dealias must be one of {DEALIAS_RULES}")

    @property
    def grid(self) -> TorusGrid:
        return self.profile.grid

    @property
    def is_linear(self) -> bool:
        return self.beta == 0.0 and not self.quadratic

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "mu": self.mu,
            "dealias": self.dealias,
            "coupling": self.coupling,
            "quadratic": self.quadratic,
            "profile": self.profile.to_dict(),
        }


def phase_schrodinger(n, t):
    """Symbol of the free Schrödinger group, exp(-i n^2 t)."""
    n = np.asarray(n, dtype=float)
    return np.exp(-1j * n * n * t)


def phase_airy(n, t, mu: float = 0.0):
    """Symbol of the Airy group with drift mu, exp(i (n^3 - mu n) t)."""
    n = np.asarray(n, dtype=float)
    return np.exp(1j * (n ** 3 - mu * n) * t)


def bound_H(n, tau, mu: float, eps: float):
    """|n| / (<tau - n^3 + mu n> <tau + n^2>)^(1/2 - eps)."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    n = np.asarray(n, dtype=float)
    tau = np.asarray(tau, dtype=float)
    airy = bracket(tau - n ** 3 + mu * n)
    schr = bracket(tau + n ** 2)
    return np.abs(n) / (airy * schr) ** (0.5 - eps)
