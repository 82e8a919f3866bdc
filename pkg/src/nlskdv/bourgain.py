"""Discrete Fourier-restriction (Bourgain) norms and empirical estimate ratios.

Space-time fields are stored through coefficients w(n, tau_m) on a uniform
time grid t_l = t0 + l dt, l = 0..M-1, with dual frequencies
tau_m = 2 pi m / (M dt) (FFT order).  The time transform is normalized as

    w(n, tau_m) = dt / sqrt(2 pi) * sum_l w_n(t_l) exp(-i tau_m t_l),

so that sum_m dtau |w(n, tau_m)|^2 = dt sum_l |w_n(t_l)|^2 exactly.  The
spatial coefficients w_n(t) follow the package convention (normalized
measure on the torus).

Norms are evaluated on windowed fields rather than as infima over
extensions, so every reported value is an upper-bound surrogate for the
corresponding restriction norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .operators import bound_H
from .spectral import TorusGrid, bracket, make_grid

FAMILIES = ("X", "Y", "Xtilde", "Ytilde", "Z", "W")
SQRT_2PI = math.sqrt(2.0 * math.pi)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def psi(t):
    """Cutoff equal to 1 on [-1, 1], supported in [-2, 2]."""
    return smooth_step(2.0 - np.abs(np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class TimeWindow:
    """psi((t - center) / scale); scale = T gives psi_T centered at `center`."""

    center: float = 0.0
    scale: float = 1.0

    def __call__(self, t):
        return psi((np.asarray(t, dtype=float) - self.center) / self.scale)

    def describe(self) -> str:
        return f"psi((t - {self.center:g}) / {self.scale:g}), psi = 1 on [-1, 1], supp psi = [-2, 2]"


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Torus grid times a uniform time grid of M samples starting at t0."""

    grid: TorusGrid
    M: int
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        if self.M < 8:
            raise ValueError("need at least 8 time samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def centered(cls, N: int, M: int, span: float = 4.0) -> "SpaceTimeGrid":
        """M samples covering [-span/2, span/2)."""
        return cls(make_grid(N), M, span / M, -span / 2.0)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.M)

    @property
    def taus(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.dt)

    @property
    def dtau(self) -> float:
        return 2.0 * np.pi / (self.M * self.dt)

    @property
    def n(self) -> np.ndarray:
        return self.grid.wavenumbers.astype(float)

    def refined(self) -> "SpaceTimeGrid":
        """Twice the resolution in both x and t over the same time span."""
        return SpaceTimeGrid(make_grid(2 * self.grid.N), 2 * self.M, self.dt / 2.0, self.t0)


@dataclass(eq=False)
class SpaceTimeField:
    grid: TorusGrid
    tgrid: SpaceTimeGrid
    coeffs: np.ndarray
    window: str = "none"

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.grid.N, self.tgrid.M):
            raise ValueError("coefficient array must have shape (N, M)")

    def __mul__(self, c):
        return SpaceTimeField(self.grid, self.tgrid, self.coeffs * c, self.window)

    __rmul__ = __mul__

    def __add__(self, other):
        return SpaceTimeField(self.grid, self.tgrid, self.coeffs + other.coeffs, self.window)

    def truncated(self, nmax: float, taumax: float) -> "SpaceTimeField":
        keep = (np.abs(self.tgrid.n)[:, None] <= nmax) & (np.abs(self.tgrid.taus)[None, :] <= taumax)
        return SpaceTimeField(self.grid, self.tgrid, np.where(keep, self.coeffs, 0.0), self.window)


def _time_phase(tg: SpaceTimeGrid):
    return np.exp(-1j * tg.taus * tg.t0)


def from_modes(modes: np.ndarray, tg: SpaceTimeGrid, window=None) -> SpaceTimeField:
    """Transform spatial coefficients w_n(t_l), shape (N, M), to w(n, tau)."""
    modes = np.asarray(modes, dtype=complex)
    desc = "none"
    if window is not None:
        modes = modes * window(tg.times)[None, :]
        desc = window.describe() if hasattr(window, "describe") else "custom"
    c = np.fft.fft(modes, axis=1) * (tg.dt / SQRT_2PI) * _time_phase(tg)[None, :]
    return SpaceTimeField(tg.grid, tg, c, desc)


def to_modes(f: SpaceTimeField) -> np.ndarray:
    tg = f.tgrid
    return np.fft.ifft(f.coeffs / _time_phase(tg)[None, :], axis=1) * (SQRT_2PI / tg.dt)


def from_physical(samples: np.ndarray, tg: SpaceTimeGrid, window=None) -> SpaceTimeField:
    """Samples w(x_j, t_l), shape (N, M), to space-time coefficients."""
    modes = np.fft.fft(np.asarray(samples), axis=0) / tg.grid.N
    return from_modes(modes, tg, window)


def to_physical(f: SpaceTimeField) -> np.ndarray:
    return np.fft.ifft(to_modes(f), axis=0) * f.grid.N


def spacetime_coefficients(trajectory, window: TimeWindow | None = None, component: str = "u") -> SpaceTimeField:
    """Space-time coefficients of one component of a uniformly sampled trajectory.

    The default window is psi rescaled so that its support is the sampled span.
    """
    t = np.asarray(trajectory.t)
    if len(t) < 8:
        raise ValueError("trajectory too short: need at least 8 time samples")
    steps = np.diff(t)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise ValueError("trajectory must be uniformly sampled")
    modes = trajectory.u_hat if component == "u" else trajectory.v_hat
    tg = SpaceTimeGrid(trajectory.grid, len(t), float(steps[0]), float(t[0]))
    if window is None:
        span = t[-1] - t[0] + steps[0]
        window = TimeWindow(center=t[0] + span / 2.0, scale=span / 4.0)
    return from_modes(np.asarray(modes).T, tg, window)


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormSpec:
    """Family and exponents; `reg` is k (Schrödinger families) or s (Airy families)."""

    family: str
    reg: float = 0.0
    b: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")


def modulation(tg: SpaceTimeGrid, family: str, mu: float = 0.0) -> np.ndarray:
    """<tau + n^2> for Schrödinger families, <tau - n^3 + mu n> for Airy families."""
    n = tg.n[:, None]
    tau = tg.taus[None, :]
    if family in ("X", "Xtilde", "Z"):
        return bracket(tau + n ** 2)
    return bracket(tau - n ** 3 + mu * n)


def _l2_part(f: SpaceTimeField, reg, b, mod):
    w = bracket(f.tgrid.n)[:, None] ** reg * mod ** b
    return math.sqrt(float(np.sum((w * np.abs(f.coeffs)) ** 2) * f.tgrid.dtau))


def _tau_integral(values: np.ndarray, tg: SpaceTimeGrid) -> np.ndarray:
    """Trapezoid rule in tau over the last axis (sorted tau grid)."""
    order = np.argsort(tg.taus)
    return trapezoid(values[..., order], tg.taus[order], axis=-1)


def norm(f: SpaceTimeField, spec: NormSpec) -> float:
    tg = f.tgrid
    fam = spec.family
    mod = modulation(tg, fam, spec.mu)
    nw = bracket(tg.n)[:, None] ** spec.reg
    a = np.abs(f.coeffs)
    if fam in ("X", "Y"):
        return _l2_part(f, spec.reg, spec.b, mod)
    if fam in ("Xtilde", "Ytilde"):
        l1 = _tau_integral(nw * a, tg)
        return _l2_part(f, spec.reg, 0.5, mod) + float(np.sqrt(np.sum(l1 ** 2)))
    col = np.sqrt(np.sum((nw * a / mod) ** 2, axis=0))
    return _l2_part(f, spec.reg, -0.5, mod) + float(_tau_integral(col, tg))


def spacetime_l2(f: SpaceTimeField) -> float:
    """Discrete L2 norm over the sampled space-time box (normalized in x)."""
    phys = to_physical(f)
    return math.sqrt(float(f.tgrid.dt * np.sum(np.mean(np.abs(phys) ** 2, axis=0))))


def lp_spacetime(f: SpaceTimeField, p: float) -> float:
    phys = to_physical(f)
    return float((f.tgrid.dt * np.sum(np.mean(np.abs(phys) ** p, axis=0))) ** (1.0 / p))


# ---------------------------------------------------------------------------
# random ensemble and ratio statistics


def random_field(
    rng: np.random.Generator,
    tg: SpaceTimeGrid,
    kind: str = "schrodinger",
    mu: float = 0.0,
    real: bool = False,
    mean_zero: bool = False,
) -> SpaceTimeField:
    """Gaussian coefficients with envelope <n>^-1 <modulation>^-1, band-limited in n."""
    n = tg.n
    family = "X" if kind == "schrodinger" else "Y"
    env = modulation(tg, family, mu) ** -1.0 * bracket(n)[:, None] ** -1.0
    band = np.abs(n) <= tg.grid.dealias_cutoff
    if mean_zero:
        band &= n != 0
    env = env * band[:, None]
    c = env * (rng.standard_normal(env.shape) + 1j * rng.standard_normal(env.shape))
    f = SpaceTimeField(tg.grid, tg, c)
    if real:
        f = SpaceTimeField(tg.grid, tg, from_physical(to_physical(f).real, tg).coeffs)
        if mean_zero:
            f.coeffs[0, :] = 0.0
    return f


@dataclass
class RatioStats:
    name: str
    ratios: list = field(default_factory=list)
    excluded: int = 0
    params: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.ratios)

    @property
    def max(self) -> float:
        return float(np.max(self.ratios)) if self.ratios else float("nan")

    @property
    def median(self) -> float:
        return float(np.median(self.ratios)) if self.ratios else float("nan")

    @property
    def finite(self) -> bool:
        return bool(self.ratios) and bool(np.all(np.isfinite(self.ratios)))

    def add(self, num: float, den: float):
        if den == 0.0 or not np.isfinite(den):
            self.excluded += 1
        else:
            self.ratios.append(num / den)

    def to_dict(self) -> dict:
        return {
            "estimate": self.name,
            "params": self.params,
            "samples": self.count + self.excluded,
            "max": self.max,
            "median": self.median,
            "excluded": self.excluded,
        }


def _product(tg, *factors, window=None):
    phys = np.ones((tg.grid.N, tg.M), dtype=complex)
    for fac in factors:
        phys = phys * fac
    return from_physical(phys, tg, window)


def trilinear_terms(u, v, w, k: float = 0.0):
    """(||psi u v conj(w)||_{Z^k}, prod of ||.||_{X^{k,3/8}})."""
    tg = u.tgrid
    prod = _product(tg, to_physical(u), to_physical(v), np.conj(to_physical(w)), window=TimeWindow())
    lhs = norm(prod, NormSpec("Z", k))
    rhs = 1.0
    for f in (u, v, w):
        rhs *= norm(f, NormSpec("X", k, 3.0 / 8.0))
    return lhs, rhs


def estimate_trilinear_ratio(samples: int, k: float, tg: SpaceTimeGrid, seed: int = 0) -> RatioStats:
    rng = np.random.default_rng(seed)
    stats = RatioStats("trilinear", params={"k": k, "N": tg.grid.N, "M": tg.M})
    for _ in range(samples):
        u, v, w = (random_field(rng, tg) for _ in range(3))
        stats.add(*trilinear_terms(u, v, w, k))
    return stats


def bilinear_terms(v1, v2, s: float, T: float, mu: float = 0.0):
    """(||psi_T d/dx(v1 v2)||_{W^s}, ||v1||_{Y^{s,1/2}} ||v2||_{Y^{s,1/2}})."""
    tg = v1.tgrid
    for v in (v1, v2):
        if np.max(np.abs(v.coeffs[0, :])) > 1e-12 * max(1.0, np.max(np.abs(v.coeffs))):
            raise ValueError("bilinear estimate needs x-mean-zero inputs")
    prod = _product(tg, to_physical(v1).real, to_physical(v2).real, window=TimeWindow(0.0, T))
    dprod = SpaceTimeField(tg.grid, tg, 1j * tg.n[:, None] * prod.coeffs * (tg.n != -tg.grid.N // 2)[:, None])
    lhs = norm(dprod, NormSpec("W", s, mu=mu))
    rhs = norm(v1, NormSpec("Y", s, 0.5, mu)) * norm(v2, NormSpec("Y", s, 0.5, mu))
    return lhs, rhs


def estimate_bilinear_ratio(samples: int, s: float, T: float, tg: SpaceTimeGrid, mu: float = 0.0, seed: int = 0) -> RatioStats:
    if not 0.0 < T < 1.0:
        raise ValueError("T must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    stats = RatioStats("bilinear", params={"s": s, "T": T, "mu": mu, "N": tg.grid.N, "M": tg.M})
    for _ in range(samples):
        v1 = random_field(rng, tg, "airy", mu, real=True, mean_zero=True)
        v2 = random_field(rng, tg, "airy", mu, real=True, mean_zero=True)
        stats.add(*bilinear_terms(v1, v2, s, T, mu))
    return stats


def bilinear_theta(samples: int, s: float, tg: SpaceTimeGrid, Ts=(0.5, 0.25, 0.125), mu: float = 0.0, seed: int = 0):
    """Empirical exponent theta from log(sup ratio) ~ theta log T."""
    sups = [estimate_bilinear_ratio(samples, s, T, tg, mu, seed).max for T in Ts]
    slope, _ = np.polyfit(np.log(Ts), np.log(sups), 1)
    return float(slope), sups


def derivative_coupling_terms(f, spec_in: NormSpec, spec_out: NormSpec):
    tg = f.tgrid
    ik = 1j * tg.n[:, None] * (tg.n != -tg.grid.N // 2)[:, None]
    df = SpaceTimeField(tg.grid, tg, ik * f.coeffs)
    return norm(df, spec_out), norm(f, spec_in)


def derivative_coupling_ratio(samples: int, k: float, s: float, tg: SpaceTimeGrid, eps: float = 0.1, mu: float = 0.0, seed: int = 0):
    """Ratios ||u_x||_{W^k} / ||u||_{X^{k,1/2-eps}} and ||v_x||_{Z^s} / ||v||_{Y^{s,1/2-eps}}."""
    rng = np.random.default_rng(seed)
    su = RatioStats("coupling_u_to_W", params={"k": k, "eps": eps, "mu": mu, "N": tg.grid.N, "M": tg.M})
    sv = RatioStats("coupling_v_to_Z", params={"s": s, "eps": eps, "mu": mu, "N": tg.grid.N, "M": tg.M})
    for _ in range(samples):
        u = random_field(rng, tg, "schrodinger")
        su.add(*derivative_coupling_terms(u, NormSpec("X", k, 0.5 - eps), NormSpec("W", k, mu=mu)))
        v = random_field(rng, tg, "airy", mu, real=True, mean_zero=True)
        sv.add(*derivative_coupling_terms(v, NormSpec("Y", s, 0.5 - eps, mu), NormSpec("Z", s)))
    return su, sv


def strichartz_terms(v, mu: float = 0.0):
    return lp_spacetime(v, 4.0), norm(v, NormSpec("Y", 0.0, 1.0 / 3.0, mu))


def strichartz_ratio(samples: int, T: float, tg: SpaceTimeGrid, mu: float = 0.0, seed: int = 0) -> RatioStats:
    """||v||_{L4 L4} / ||v||_{Y^{0,1/3}} for fields localized by psi_T."""
    if not T > 0:
        raise ValueError("T must be positive")
    rng = np.random.default_rng(seed)
    stats = RatioStats("strichartz", params={"T": T, "mu": mu, "N": tg.grid.N, "M": tg.M})
    win = TimeWindow(0.0, T)
    for _ in range(samples):
        v = random_field(rng, tg, "airy", mu, real=True, mean_zero=True)
        v = from_physical(to_physical(v).real, tg, win)
        stats.add(*strichartz_terms(v, mu))
    return stats


def time_localization_terms(f, b: float, bprime: float, T: float, reg: float = 0.0):
    tg = f.tgrid
    loc = from_physical(to_physical(f), tg, TimeWindow(0.0, T))
    lhs = norm(loc, NormSpec("X", reg, bprime))
    rhs = T ** (b - bprime) * norm(f, NormSpec("X", reg, b))
    return lhs, rhs


def time_localization_ratio(samples: int, b: float, bprime: float, T: float, tg: SpaceTimeGrid, reg: float = 0.0, seed: int = 0) -> RatioStats:
    """||psi_T f||_{X^{s,b'}} / (T^{b-b'} ||f||_{X^{s,b}})."""
    if not -0.5 < bprime <= b < 0.5:
        raise ValueError("need -1/2 < b' <= b < 1/2")
    if not 0.0 < T < 1.0:
        raise ValueError("T must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    stats = RatioStats("time_localization", params={"b": b, "bprime": bprime, "T": T, "N": tg.grid.N, "M": tg.M})
    for _ in range(samples):
        stats.add(*time_localization_terms(random_field(rng, tg), b, bprime, T, reg))
    return stats


# ---------------------------------------------------------------------------
# symbol scan


@dataclass
class ScanResult:
    sup: float
    argmax_n: int
    argmax_tau: float
    points: int
    violations: int
    corrected_violations: int
    worst_margin: float
    worst_point: tuple

    def to_dict(self) -> dict:
        return {
            "sup": self.sup,
            "argmax_n": self.argmax_n,
            "argmax_tau": self.argmax_tau,
            "points": self.points,
            "violations": self.violations,
            "corrected_violations": self.corrected_violations,
            "worst_margin": self.worst_margin,
            "worst_point": list(self.worst_point),
        }


def tau_offsets(points_per_side: int = 60, lo: float = -3.0, hi: float = 9.5) -> np.ndarray:
    """Symmetric log-spaced offsets plus zero."""
    mags = np.logspace(lo, hi, points_per_side)
    return np.concatenate([-mags[::-1], [0.0], mags])


def scan_tau_grid(n: int, mu: float, offsets: np.ndarray) -> np.ndarray:
    """Offsets around both resonance curves, plus a log grid over [-2|n|^3, 2|n|^3]."""
    centers = (n ** 3 - mu * n, -float(n * n))
    span = 2.0 * max(abs(n) ** 3, 1)
    cover = np.logspace(-3, np.log10(span), len(offsets) // 2)
    return np.concatenate([centers[0] + offsets, centers[1] + offsets, cover, -cover])


def scan_symbol_bound(Nmax: int, tau_grid_spec: dict | None = None, mu: float = 0.0, eps: float = 0.1, ns=None) -> ScanResult:
    """Sup of bound_H and pointwise check of <a><b> >= |n^3 - n^2 - mu n| / 4.

    Also counts failures of the sign-corrected bound |n^3 + n^2 - mu n| / 4,
    where a = tau - n^3 + mu n and b = tau + n^2 so that b - a = n^3 + n^2 - mu n.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    spec = dict(points_per_side=250, lo=-3.0, hi=9.5)
    spec.update(tau_grid_spec or {})
    offsets = tau_offsets(spec["points_per_side"], spec["lo"], spec["hi"])
    ns = np.arange(-Nmax, Nmax + 1) if ns is None else np.asarray(ns)
    best = (-1.0, 0, 0.0)
    points = violations = corrected = 0
    worst = (np.inf, (0, 0.0))
    for n in ns:
        n = int(n)
        tau = scan_tau_grid(n, mu, offsets)
        h = bound_H(n, tau, mu, eps)
        i = int(np.argmax(h))
        if h[i] > best[0]:
            best = (float(h[i]), n, float(tau[i]))
        prod = bracket(tau - n ** 3 + mu * n) * bracket(tau + n * n)
        stated = 0.25 * abs(n ** 3 - n * n - mu * n)
        fixed = 0.25 * abs(n ** 3 + n * n - mu * n)
        margin = prod - stated
        j = int(np.argmin(margin))
        if margin[j] < worst[0]:
            worst = (float(margin[j]), (n, float(tau[j])))
        violations += int(np.sum(margin < 0))
        corrected += int(np.sum(prod < fixed))
        points += len(tau)
    return ScanResult(best[0], best[1], best[2], points, violations, corrected, worst[0], worst[1])
