"""Time integration of the coupled Schrödinger-KdV system on the torus.

The evolved variables are ``u`` (complex) and the mean-free part of ``v``;
the mean of ``v`` is conserved exactly and enters only as an extra drift,
so it is carried alongside the state as ``v_mean``.

Explicit form of the closed-loop equations integrated here::

    du/dt = i u_xx + v_x - i beta |u|^2 u - a^2 u              (+ forcing)
    dv/dt = -v_xxx - (mu + [v]) v_x - (v^2)_x / 2 + Re(u_x) - G G v  (+ forcing)

The stepper is a Strang splitting.  The outer half-steps apply the exact
flow of every linear conservative term (dispersion, drift and the two
first-order cross terms).  These couple ``u_n``, ``conj(u_-n)`` and ``v_n``
only, so each wavenumber contributes a 3x3 skew-Hermitian block that is
exponentiated once by an eigendecomposition.  The inner full step advances
damping, nonlinear terms and any forcing with classical RK4.  Because the
outer flow is exactly orthogonal, the linear discrete dynamics are exactly
invertible and their adjoint is available in closed form, which the control
module relies on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .operators import SystemParams, apply_G_samples
from .spectral import SpectralField, TorusGrid, symmetrize, to_spectral

logger = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e8
SQRT2 = np.sqrt(2.0)


class BlowUpError(RuntimeError):
    """A coefficient became non-finite or exceeded the blow-up threshold."""


class PicardDivergence(RuntimeError):
    """Picard iteration failed to contract; the horizon is too long."""


class AlreadyAtRest(ValueError):
    """Energy vanishes on the fit window so no decay rate exists."""


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class WaveState:
    """The pair (u, v - [v]) at time t, with the conserved mean [v] kept aside."""

    u: SpectralField
    v: SpectralField
    t: float = 0.0
    v_mean: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v must share a grid")
        if not self.v.real:
            raise ValueError("v must be a real field")
        if not self.v.mean_zero:
            raise ValueError("v must be stored mean-free; pass its mean as v_mean")

    @property
    def grid(self) -> TorusGrid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid, u_hat, v_hat, t=0.0, v_mean=0.0) -> "WaveState":
        u = SpectralField(grid, u_hat, real=False, _validate=False)
        v = SpectralField(grid, symmetrize(np.asarray(v_hat)), real=True, mean_zero=True, _validate=False)
        return cls(u, v, float(t), float(v_mean))

    @classmethod
    def from_samples(cls, grid, u_samples, v_samples, t=0.0) -> "WaveState":
        """Build a state from grid values of u and the full (not mean-free) v."""
        u = to_spectral(np.asarray(u_samples, dtype=complex), grid, real=False)
        v_full = to_spectral(np.real(v_samples), grid, real=True)
        v_mean = float(v_full.coeffs[0].real)
        return cls.from_arrays(grid, u.coeffs, v_full.coeffs, t, v_mean)

    @classmethod
    def zero(cls, grid, v_mean=0.0) -> "WaveState":
        z = np.zeros(grid.N, dtype=complex)
        return cls.from_arrays(grid, z, z, 0.0, v_mean)

    def arrays(self):
        return np.array(self.u.coeffs), np.array(self.v.coeffs)

    def v_samples(self) -> np.ndarray:
        """Full v on the grid, mean restored."""
        return self.v.samples() + self.v_mean

    def energy(self) -> float:
        return energy(self)

    def norm(self) -> float:
        return float(np.sqrt(energy(self)))

    def at_time(self, t: float) -> "WaveState":
        return WaveState(self.u, self.v, float(t), self.v_mean)

    def to_dict(self) -> dict:
        return {
            "N": self.grid.N,
            "t": self.t,
            "v_mean": self.v_mean,
            "u_re": self.u.coeffs.real.tolist(),
            "u_im": self.u.coeffs.imag.tolist(),
            "v_re": self.v.coeffs.real.tolist(),
            "v_im": self.v.coeffs.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaveState":
        from .spectral import make_grid

        grid = make_grid(int(d["N"]))
        u = np.asarray(d["u_re"]) + 1j * np.asarray(d["u_im"])
        v = np.asarray(d["v_re"]) + 1j * np.asarray(d["v_im"])
        return cls.from_arrays(grid, u, v, d["t"], d["v_mean"])


def random_state(
    grid: TorusGrid,
    rng: np.random.Generator,
    norm: float = 1.0,
    width: float = 2.0,
    v_mean: float = 0.0,
    band: bool = True,
) -> WaveState:
    """Smooth random data with Gaussian spectral envelope exp(-n^2 / (2 width^2)).

    The pair is scaled so that ||u||^2 + ||v - [v]||^2 = norm^2.
    """
    n = grid.wavenumbers.astype(float)
    env = np.exp(-(n ** 2) / (2.0 * width ** 2))
    if band:
        env = env * grid.dealias_mask
    env[grid.nyquist_index] = 0.0
    u = env * (rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N))
    v = env * (rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N))
    v = symmetrize(v)
    v[0] = 0.0
    total = np.sqrt(np.sum(np.abs(u) ** 2) + np.sum(np.abs(v) ** 2))
    if total == 0.0:
        return WaveState.zero(grid, v_mean)
    scale = norm / total
    return WaveState.from_arrays(grid, u * scale, v * scale, 0.0, v_mean)


def energy(state: WaveState) -> float:
    """E = ||u||^2 + ||v - [v]||^2 in the normalized L2 norm."""
    return float(np.sum(np.abs(state.u.coeffs) ** 2) + np.sum(np.abs(state.v.coeffs) ** 2))


def _energy_arrays(uh, vh):
    return np.sum(np.abs(uh) ** 2, axis=-1) + np.sum(np.abs(vh) ** 2, axis=-1)


# ---------------------------------------------------------------------------
# the spatial model


class LinearFlow:
    """Exact flow of dispersion, drift and linear cross-coupling.

    For 1 <= n <= nmax the triple (u_n, conj(u_-n), sqrt(2) v_n) evolves by
    exp(i t H_n) with H_n real symmetric; all other modes only pick up their
    diagonal dispersive phase.
    """

    def __init__(self, grid: TorusGrid, mu: float, coupling: bool, nmax: int):
        self.grid = grid
        self.mu = float(mu)
        self.nmax = int(nmax)
        n = np.arange(1, self.nmax + 1, dtype=float)
        c = n / SQRT2 if coupling else np.zeros_like(n)
        H = np.zeros((self.nmax, 3, 3))
        H[:, 0, 0] = -(n ** 2)
        H[:, 1, 1] = n ** 2
        H[:, 2, 2] = n ** 3 - self.mu * n
        H[:, 0, 2] = H[:, 2, 0] = c
        H[:, 1, 2] = H[:, 2, 1] = c
        self.eigvals, self.eigvecs = np.linalg.eigh(H)
        self._pos = np.arange(1, self.nmax + 1)
        self._neg = (-self._pos) % grid.N
        k = grid.wavenumbers.astype(float)
        self._k = k
        self._diag_mask = np.ones(grid.N, dtype=bool)
        self._diag_mask[self._pos] = False
        self._diag_mask[self._neg] = False
        self._cache: dict[float, tuple] = {}

    def _operators(self, t: float):
        key = float(t)
        ops = self._cache.get(key)
        if ops is None:
            Q = self.eigvecs
            blocks = np.einsum("nij,nj,nkj->nik", Q, np.exp(1j * self.eigvals * t), Q)
            pu = np.exp(-1j * self._k ** 2 * t)
            pv = np.exp(1j * (self._k ** 3 - self.mu * self._k) * t)
            pv[self.grid.nyquist_index] = 1.0
            ops = (blocks, pu, pv)
            if len(self._cache) < 64:
                self._cache[key] = ops
        return ops

    def apply(self, uh: np.ndarray, vh: np.ndarray, t: float):
        """Propagate coefficient arrays (leading batch axes allowed) by time t."""
        blocks, pu, pv = self._operators(t)
        uo = np.where(self._diag_mask, uh * pu, 0.0)
        vo = np.where(self._diag_mask, vh * pv, 0.0)
        if self.nmax:
            z = np.stack(
                [uh[..., self._pos], np.conj(uh[..., self._neg]), SQRT2 * vh[..., self._pos]],
                axis=-1,
            )
            z = np.einsum("nij,...nj->...ni", blocks, z)
            uo[..., self._pos] = z[..., 0]
            uo[..., self._neg] = np.conj(z[..., 1])
            vp = z[..., 2] / SQRT2
            vo[..., self._pos] = vp
            vo[..., self._neg] = np.conj(vp)
        return uo, vo


class Model:
    """Spatial operators of the system for fixed parameters and mean [v]."""

    def __init__(self, params: SystemParams, v_mean: float = 0.0):
        self.params = params
        self.grid = params.grid
        self.v_mean = float(v_mean)
        self.mu_eff = params.mu + self.v_mean
        grid = self.grid
        N = grid.N
        self.N = N
        k = grid.wavenumbers.astype(float)
        self.ik = 1j * k
        self.ik[grid.nyquist_index] = 0.0
        self.a2 = params.profile.a2_samples
        self.g = params.profile.g_samples
        self.dx = grid.dx
        self.beta = float(params.beta)
        self.quadratic = bool(params.quadratic)
        self.coupling = bool(params.coupling)
        if params.dealias == "two-thirds":
            self.mask = grid.dealias_mask.astype(float)
            nmax = grid.dealias_cutoff
        else:
            self.mask = np.ones(N)
            nmax = N // 2 - 1
        self.vmask = self.mask.copy()
        self.vmask[0] = 0.0
        self.vmask[grid.nyquist_index] = 0.0 if params.dealias == "two-thirds" else 1.0
        self.flow = LinearFlow(grid, self.mu_eff, self.coupling, nmax)
        self.disp_u = -1j * k ** 2
        self.disp_v = 1j * (k ** 3 - self.mu_eff * k)
        self.disp_v[grid.nyquist_index] = 0.0

    # transforms along the last axis
    def phys(self, ch):
        return np.fft.ifft(ch, axis=-1) * self.N

    def spec(self, s):
        return np.fft.fft(s, axis=-1) / self.N

    def project(self, uh, vh):
        vh = vh * self.vmask
        return uh * self.mask, vh

    def project_state(self, uh, vh):
        """Project data onto the resolved band and make v real and mean-free."""
        uh, vh = self.project(np.asarray(uh, dtype=complex), symmetrize(np.asarray(vh, dtype=complex)))
        return uh, vh

    def G(self, h):
        return apply_G_samples(self.g, h, self.dx)

    def has_middle_terms(self, damped: bool) -> bool:
        return damped or self.beta != 0.0 or self.quadratic

    def middle_rhs(self, uh, vh, damped: bool):
        """Damping and nonlinear terms (no dispersion, drift or coupling)."""
        du = np.zeros_like(uh)
        dv = np.zeros_like(vh)
        need_u = damped or self.beta != 0.0
        need_v = damped or self.quadratic
        if need_u:
            u = self.phys(uh)
            acc = np.zeros_like(u)
            if self.beta != 0.0:
                acc -= 1j * self.beta * (np.abs(u) ** 2) * u
            if damped:
                acc -= self.a2 * u
            du = self.spec(acc)
        if need_v:
            v = self.phys(vh).real
            if self.quadratic:
                dv = dv - 0.5 * self.ik * self.spec(v * v)
            if damped:
                dv = dv - self.spec(self.G(self.G(v)))
        return self.project(du, dv)

    def coupling_rhs(self, uh, vh):
        """Cross terms (v_x, Re u_x)."""
        if not self.coupling:
            return np.zeros_like(uh), np.zeros_like(vh)
        ux = self.phys(self.ik * uh)
        return self.project(self.ik * vh, self.spec(ux.real))

    def linear_rhs(self, uh, vh):
        """Dispersion, drift and cross-coupling, consistent with LinearFlow."""
        cu, cv = self.coupling_rhs(uh, vh)
        du, dv = self.project(self.disp_u * uh, self.disp_v * vh)
        return du + cu, dv + cv

    def full_rhs(self, uh, vh, damped: bool = True):
        lu, lv = self.linear_rhs(uh, vh)
        mu_, mv = self.middle_rhs(uh, vh, damped)
        return lu + mu_, lv + mv

    def dissipation(self, uh, vh):
        """-2 (||a u||^2 + ||G v||^2) from grid quadrature."""
        u = self.phys(uh)
        v = self.phys(vh).real
        au = np.mean(self.a2 * np.abs(u) ** 2, axis=-1)
        gv = np.mean(self.G(v) ** 2, axis=-1)
        return -2.0 * (au + gv)

    def forcing_from_controls(self, f, h):
        """Spectral forcing (-i f, G h) from grid samples of the controls."""
        fu = self.spec(-1j * np.asarray(f, dtype=complex))
        fv = self.spec(self.G(np.real(h)))
        return self.project(fu, fv)


class Stepper:
    """Strang step: half linear flow, RK4 on the rest, half linear flow."""

    def __init__(self, model: Model, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.model = model
        self.dt = float(dt)

    def half_flow(self, uh, vh, sign: float = 1.0):
        return self.model.flow.apply(uh, vh, sign * 0.5 * self.dt)

    def rk4(self, uh, vh, damped: bool, fu=None, fv=None):
        m = self.model
        h = self.dt
        forced = fu is not None
        if not m.has_middle_terms(damped):
            if forced:
                return uh + h * fu, vh + h * fv
            return uh, vh

        def f(a, b):
            du, dv = m.middle_rhs(a, b, damped)
            if forced:
                du = du + fu
                dv = dv + fv
            return du, dv

        k1u, k1v = f(uh, vh)
        k2u, k2v = f(uh + 0.5 * h * k1u, vh + 0.5 * h * k1v)
        k3u, k3v = f(uh + 0.5 * h * k2u, vh + 0.5 * h * k2v)
        k4u, k4v = f(uh + h * k3u, vh + h * k3v)
        return (
            uh + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u),
            vh + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v),
        )

    def step(self, uh, vh, damped: bool = True, fu=None, fv=None):
        # overflow surfaces as non-finite coefficients, which the guard reports
        with np.errstate(over="ignore", invalid="ignore"):
            uh, vh = self.half_flow(uh, vh)
            uh, vh = self.rk4(uh, vh, damped, fu, fv)
            uh, vh = self.half_flow(uh, vh)
        check_finite(uh, vh)
        return uh, vh


def check_finite(uh, vh):
    big = max(np.max(np.abs(uh), initial=0.0), np.max(np.abs(vh), initial=0.0))
    if not np.isfinite(big) or big > BLOWUP_THRESHOLD:
        raise BlowUpError(f"coefficient magnitude {big:.3e} exceeds blow-up guard")


# ---------------------------------------------------------------------------
# public single-state operations


def rhs_closed_loop(state: WaveState, params: SystemParams):
    """Tangent (du/dt, dv/dt) of the damped system at `state`."""
    m = Model(params, state.v_mean)
    uh, vh = state.arrays()
    du, dv = m.full_rhs(uh, vh, damped=True)
    g = state.grid
    return (
        SpectralField(g, du, real=False, _validate=False),
        SpectralField(g, symmetrize(dv), real=True, mean_zero=True, _validate=False),
    )


def dissipation_rate(state: WaveState, params: SystemParams) -> float:
    m = Model(params, state.v_mean)
    uh, vh = state.arrays()
    return float(m.dissipation(uh, vh))


def step(state: WaveState, params: SystemParams, dt: float, forcing=None, damped: bool = True) -> WaveState:
    """Advance one Strang step.

    `forcing` is an optional pair (f, Gh) of SpectralFields added to the
    right-hand sides as -i f and Gh, held fixed over the step.
    """
    m = Model(params, state.v_mean)
    uh, vh = state.arrays()
    fu = fv = None
    if forcing is not None:
        f, gh = forcing
        fu, fv = m.project(-1j * np.asarray(f.coeffs), np.asarray(gh.coeffs))
    uh, vh = Stepper(m, dt).step(uh, vh, damped, fu, fv)
    return WaveState.from_arrays(state.grid, uh, vh, state.t + dt, state.v_mean)


# ---------------------------------------------------------------------------
# controls and trajectories


@dataclass(eq=False)
class ControlSignal:
    """Grid samples of the controls (f, h) at the step midpoints.

    ``f`` has shape (M, N) complex and ``h`` shape (M, N) real; sample m
    acts on the interval [m dt, (m + 1) dt].  The KdV equation sees G h.
    """

    f: np.ndarray
    h: np.ndarray
    T: float
    dt: float

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=complex)
        self.h = np.asarray(self.h, dtype=float)
        if self.f.shape != self.h.shape or self.f.ndim != 2:
            raise ValueError("f and h must be (samples, N) arrays of equal shape")
        expected = int(round(self.T / self.dt))
        if self.f.shape[0] != expected:
            raise ValueError(f"expected {expected} samples for horizon {self.T} at dt {self.dt}")

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.f.shape[0]) + 0.5) * self.dt

    @classmethod
    def zeros(cls, N: int, T: float, dt: float) -> "ControlSignal":
        M = int(round(T / dt))
        return cls(np.zeros((M, N), complex), np.zeros((M, N)), T, dt)

    def resampled(self, dt: float) -> "ControlSignal":
        """Linear interpolation of the samples onto midpoints of another step."""
        if abs(dt - self.dt) <= 1e-12 * self.dt:
            return self
        M = int(round(self.T / dt))
        new_t = (np.arange(M) + 0.5) * dt
        old_t = self.times

        def interp(arr):
            out = np.empty((M, arr.shape[1]), dtype=arr.dtype)
            for j in range(arr.shape[1]):
                if np.iscomplexobj(arr):
                    out[:, j] = np.interp(new_t, old_t, arr[:, j].real) + 1j * np.interp(new_t, old_t, arr[:, j].imag)
                else:
                    out[:, j] = np.interp(new_t, old_t, arr[:, j])
            return out

        return ControlSignal(interp(self.f), interp(self.h), self.T, dt)

    @staticmethod
    def concatenate(signals) -> "ControlSignal":
        signals = list(signals)
        dt = signals[0].dt
        if any(abs(s.dt - dt) > 1e-12 * dt for s in signals):
            raise ValueError("signals must share a time step")
        f = np.concatenate([s.f for s in signals])
        h = np.concatenate([s.h for s in signals])
        return ControlSignal(f, h, f.shape[0] * dt, dt)

    def l2_norm(self) -> float:
        """Space-time L2 norm of (f, h)."""
        return float(np.sqrt(self.dt * (np.sum(np.mean(np.abs(self.f) ** 2, axis=1)) + np.sum(np.mean(self.h ** 2, axis=1)))))


@dataclass(eq=False)
class Trajectory:
    """Uniformly sampled solution; coefficient arrays indexed by sample."""

    t: np.ndarray
    u_hat: np.ndarray
    v_hat: np.ndarray
    dt: float
    meta: SystemParams
    v_mean: float = 0.0
    energy: np.ndarray = None
    dissipation: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("time stamps must increase strictly")
        if self.energy is None:
            self.energy = _energy_arrays(self.u_hat, self.v_hat)
        if self.dissipation is None:
            self.dissipation = Model(self.meta, self.v_mean).dissipation(self.u_hat, self.v_hat)

    def __len__(self):
        return len(self.t)

    @property
    def grid(self) -> TorusGrid:
        return self.meta.grid

    def state(self, i: int) -> WaveState:
        return WaveState.from_arrays(self.grid, self.u_hat[i], self.v_hat[i], self.t[i], self.v_mean)

    @property
    def states(self) -> list:
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> WaveState:
        return self.state(len(self) - 1)

    def v_means(self) -> np.ndarray:
        """[v](t) at every sample, including the stored mean."""
        return self.v_hat[:, 0].real + self.v_mean

    def norms(self):
        return np.linalg.norm(self.u_hat, axis=1), np.linalg.norm(self.v_hat, axis=1)

    def csv_rows(self):
        nu, nv = self.norms()
        for i in range(len(self)):
            yield (self.t[i], self.energy[i], nu[i], nv[i], self.dissipation[i])


def _step_count(T: float, dt: float) -> int:
    if not T > 0:
        raise ValueError("T must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    M = int(round(T / dt))
    if M < 1 or abs(M * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("dt must divide T")
    return M


def simulate(
    params: SystemParams,
    initial: WaveState,
    T: float,
    dt: float,
    forcing: ControlSignal | None = None,
    damped: bool = True,
    record_every: int = 1,
) -> Trajectory:
    """Integrate from `initial` over [0, T] and record every `record_every` steps."""
    M = _step_count(T, dt)
    model = Model(params, initial.v_mean)
    stepper = Stepper(model, dt)
    uh, vh = model.project_state(*initial.arrays())
    fu_all = fv_all = None
    if forcing is not None:
        sig = forcing.resampled(dt)
        if sig.f.shape[0] != M:
            raise ValueError("control horizon does not match T")
        fu_all, fv_all = model.forcing_from_controls(sig.f, sig.h)
    t0 = initial.t
    rec_t = [t0]
    rec_u = [uh]
    rec_v = [vh]
    for k in range(M):
        if fu_all is None:
            uh, vh = stepper.step(uh, vh, damped)
        else:
            uh, vh = stepper.step(uh, vh, damped, fu_all[k], fv_all[k])
        if (k + 1) % record_every == 0 or k + 1 == M:
            rec_t.append(t0 + (k + 1) * dt)
            rec_u.append(uh)
            rec_v.append(vh)
    return Trajectory(
        np.asarray(rec_t),
        np.asarray(rec_u),
        np.asarray(rec_v),
        dt * record_every,
        params,
        initial.v_mean,
    )


def fit_decay_rate(trajectory: Trajectory, t0: float, t1: float):
    """Least-squares fit of log E on [t0, t1].

    Returns (gamma, C, r2) for the model ||x(t)|| ~ C exp(-gamma t) ||x(0)||.
    """
    if not t1 > t0 >= 0:
        raise ValueError("need t1 > t0 >= 0")
    t = trajectory.t
    if t0 < t[0] - 1e-12 or t1 > t[-1] + 1e-12:
        raise ValueError("fit window outside trajectory span")
    sel = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    E = trajectory.energy[sel]
    if np.any(E <= 0.0):
        raise AlreadyAtRest("energy vanishes on the fit window: already at rest")
    ts = t[sel]
    logE = np.log(E)
    slope, intercept = np.polyfit(ts, logE, 1)
    resid = logE - (slope * ts + intercept)
    ss_tot = float(np.sum((logE - logE.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    gamma = -slope / 2.0
    C = float(np.exp(0.5 * (intercept - np.log(trajectory.energy[0]))))
    return float(gamma), C, float(r2)


# ---------------------------------------------------------------------------
# Picard-Duhamel oracle


def _picard_sweep(model, U, V, free_u, free_v, su, sv, t, damped):
    """One application of the discretized Duhamel maps."""
    nu, nv = model.middle_rhs(U, V, damped)
    cu, cv = model.coupling_rhs(U, V)
    Iu = cumulative_trapezoid((nu + cu) / su, t, axis=0, initial=0.0)
    Iv = cumulative_trapezoid((nv + cv) / sv, t, axis=0, initial=0.0)
    return free_u + su * Iu, free_v + sv * Iv


def picard_solve(
    params: SystemParams,
    initial: WaveState,
    T: float,
    K: int = 60,
    n_time: int = 2048,
    tol: float = 1e-10,
    damped: bool = True,
) -> Trajectory:
    """Fixed-point iteration of the Duhamel formulation on a uniform time grid.

    The free groups are the diagonal Schrödinger and Airy phases; every other
    term (cross-coupling, nonlinearity, damping) sits in the integrand, which
    is integrated with the cumulative trapezoid rule.  The sup over time of
    the L2 distance between successive iterates is recorded in
    ``diagnostics["differences"]``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    model = Model(params, initial.v_mean)
    t = np.linspace(0.0, T, n_time + 1)
    su = np.exp(np.outer(t, model.disp_u))
    sv = np.exp(np.outer(t, model.disp_v))
    u0, v0 = model.project_state(*initial.arrays())
    U = su * u0
    V = sv * v0
    free_u, free_v = U.copy(), V.copy()
    diffs = []
    converged = False
    for _ in range(K):
        with np.errstate(over="ignore", invalid="ignore"):
            U_new, V_new = _picard_sweep(model, U, V, free_u, free_v, su, sv, t, damped)
            d = float(np.max(np.sqrt(_energy_arrays(U_new - U, V_new - V))))
        diffs.append(d)
        U, V = U_new, V_new
        if not np.all(np.isfinite(U)) or not np.all(np.isfinite(V)):
            break
        if d <= tol:
            converged = True
            break
    ratios = [diffs[i + 1] / diffs[i] for i in range(len(diffs) - 1) if diffs[i] > 0]
    if not converged:
        raise PicardDivergence(
            f"no convergence in {K} iterations (last difference {diffs[-1]:.3e}): "
            "outside contraction regime, shrink T"
        )
    traj = Trajectory(t, U, V, T / n_time, params, initial.v_mean)
    traj.diagnostics.update(iterations=len(diffs), differences=diffs, ratios=ratios)
    return traj
