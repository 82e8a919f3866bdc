"""Exact controls: HUM for the linear dynamics, a fixed point for the nonlinear
dynamics near rest, and stabilize-then-steer transfer between large states.

Conventions.  A costate p = (phi, psi) evolves by the exact discrete linear
flow E, p(s) = E(s) p0.  Its controls at the step midpoint s_m are

    f = -i chi(s_m)^2 a^2 phi(s_m),        h = -G psi(s_m),

so the forcing entering the equations is -(chi^2 a^2 phi, G G psi).  With
x0 the initial state, the discrete linear solution then ends at

    x(T) = E(T) (x0 - Gamma p0),   Gamma = dt sum_m E(-s_m) D_m E(s_m),

where D_m = diag(chi(s_m)^2 a^2, G G) restricted to the resolved band.
Gamma is symmetric positive semidefinite by construction; it is the map
p0 -> (u_L(0), v_L(0)) obtained by solving the controlled linear system
backward from rest at time T.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dynamics import (
    BlowUpError,
    ControlSignal,
    Model,
    Stepper,
    WaveState,
    _step_count,
    check_finite,
    simulate,
)
from .operators import SystemParams
from .spectral import SpectralField, symmetrize

logger = logging.getLogger(__name__)


class ControlDivergence(RuntimeError):
    """An iterative control solver failed to converge."""


class GramianIllConditioned(ControlDivergence):
    """Conjugate gradients on the Gramian hit the iteration cap."""


class LocalControlDivergence(ControlDivergence):
    """The nonlinear fixed-point iteration did not contract."""


class TransferTimeout(RuntimeError):
    """Energy did not fall below the local-control threshold in time."""


def smoothstep(s):
    """Quintic smoothstep 6s^5 - 15s^4 + 10s^3 clipped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def time_window(t, T: float):
    """Smooth window equal to 1 on [T/3, 2T/3] and 0 on [0, T/12] and [11T/12, T]."""
    t = np.asarray(t, dtype=float)
    lo, hi = T / 12.0, T / 3.0
    rise = smoothstep((t - lo) / (hi - lo))
    fall = smoothstep((T - t - lo) / (hi - lo))
    return rise * fall


def linearized(params: SystemParams) -> SystemParams:
    """Same system with the cubic and quadratic nonlinearities switched off."""
    return replace(params, beta=0.0, quadratic=False)


@dataclass(eq=False)
class ControlProblem:
    """Steer `initial` to `target` over [0, T] with open-loop controls."""

    params: SystemParams
    initial: WaveState
    target: WaveState
    T: float = 1.0
    dt: float = 0.01
    phi_cutoff: Callable = time_window

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        _step_count(self.T, self.dt)
        if self.initial.grid != self.params.grid or self.target.grid != self.params.grid:
            raise ValueError("states must live on the parameter grid")
        if abs(self.initial.v_mean - self.target.v_mean) > 1e-12:
            raise ValueError("initial and target must have the same mean of v")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.steps) + 0.5) * self.dt


@dataclass
class GramianReport:
    cg_iterations: int = 0
    residual: float = 0.0
    symmetry_defect: float = 0.0
    min_rayleigh: float = float("inf")
    fallback: bool = False
    verified_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "cg_iterations": self.cg_iterations,
            "residual": self.residual,
            "symmetry_defect": self.symmetry_defect,
            "min_rayleigh": self.min_rayleigh,
            "fallback": self.fallback,
            "verified_residual": self.verified_residual,
        }


class StatePacker:
    """Real coordinates for band-limited states with Euclidean = L2 inner product."""

    def __init__(self, model: Model):
        self.N = model.N
        self.u_idx = np.flatnonzero(model.mask)
        pos = np.flatnonzero(model.vmask)
        k = model.grid.wavenumbers
        self.v_idx = pos[k[pos] > 0]
        self.v_neg = (-k[self.v_idx]) % self.N
        self.nu = len(self.u_idx)
        self.nv = len(self.v_idx)
        self.dim = 2 * self.nu + 2 * self.nv

    def pack(self, uh, vh) -> np.ndarray:
        u = uh[self.u_idx]
        v = vh[self.v_idx] * np.sqrt(2.0)
        return np.concatenate([u.real, u.imag, v.real, v.imag])

    def unpack(self, x):
        uh = np.zeros(self.N, dtype=complex)
        vh = np.zeros(self.N, dtype=complex)
        nu, nv = self.nu, self.nv
        uh[self.u_idx] = x[:nu] + 1j * x[nu:2 * nu]
        vp = (x[2 * nu:2 * nu + nv] + 1j * x[2 * nu + nv:]) / np.sqrt(2.0)
        vh[self.v_idx] = vp
        vh[self.v_neg] = np.conj(vp)
        return uh, vh


def adjoint_free_flow(phi0: SpectralField, psi0: SpectralField, t: float, mu: float = 0.0):
    """Free Schrödinger and Airy groups applied to (phi0, psi0)."""
    if not psi0.real:
        raise ValueError("psi0 must be real")
    if abs(psi0.coeffs[0]) > 1e-12:
        raise ValueError("psi0 must be mean-zero")
    from .operators import phase_airy, phase_schrodinger

    k = phi0.grid.wavenumbers
    phi = phi0.with_coeffs(phi0.coeffs * phase_schrodinger(k, t))
    pv = phase_airy(k, t, mu)
    pv[phi0.grid.nyquist_index] = 1.0
    psi = SpectralField(psi0.grid, psi0.coeffs * pv, real=True, mean_zero=True, _validate=False)
    return phi, psi


class HumGramian:
    """Discrete HUM Gramian of the linear controlled system."""

    def __init__(self, problem: ControlProblem):
        self.problem = problem
        self.model = Model(problem.params, problem.initial.v_mean)
        self.stepper = Stepper(self.model, problem.dt)
        self.packer = StatePacker(self.model)
        self.M = problem.steps
        self.dt = problem.dt
        self.chi2 = problem.phi_cutoff(problem.midpoints, problem.T) ** 2
        self.applications = 0

    def costate_path(self, pu, pv):
        """p(s_m) = E(s_m) p0 for every midpoint, as (M, N) arrays."""
        flow = self.model.flow
        ys_u = np.empty((self.M, self.model.N), dtype=complex)
        ys_v = np.empty_like(ys_u)
        yu, yv = flow.apply(pu, pv, 0.5 * self.dt)
        for m in range(self.M):
            ys_u[m], ys_v[m] = yu, yv
            if m + 1 < self.M:
                yu, yv = flow.apply(yu, yv, self.dt)
        return ys_u, ys_v

    def weighted(self, ys_u, ys_v):
        """D_m p(s_m) for all m at once."""
        m = self.model
        du = m.spec(self.chi2[:, None] * m.a2 * m.phys(ys_u))
        dv = m.spec(m.G(m.G(m.phys(ys_v).real)))
        return m.project(du, dv)

    def apply_arrays(self, pu, pv):
        ys_u, ys_v = self.costate_path(pu, pv)
        zu, zv = self.weighted(ys_u, ys_v)
        flow = self.model.flow
        au, av = zu[-1], zv[-1]
        for m in range(self.M - 2, -1, -1):
            au, av = flow.apply(au, av, -self.dt)
            au = au + zu[m]
            av = av + zv[m]
        au, av = flow.apply(au, av, -0.5 * self.dt)
        self.applications += 1
        return self.dt * au, self.dt * av

    def matvec(self, x: np.ndarray) -> np.ndarray:
        pu, pv = self.packer.unpack(x)
        return self.packer.pack(*self.apply_arrays(pu, pv))

    def controls(self, pu, pv):
        """Grid samples (f, h) generated by costate p0, shape (M, N)."""
        ys_u, ys_v = self.costate_path(pu, pv)
        m = self.model
        f = -1j * self.chi2[:, None] * m.a2 * m.phys(ys_u)
        h = -m.G(m.phys(ys_v).real)
        return f, h

    def forcing(self, pu, pv):
        """Spectral forcing arrays matching `controls`."""
        ys_u, ys_v = self.costate_path(pu, pv)
        zu, zv = self.weighted(ys_u, ys_v)
        return -zu, -zv

    def symmetry_defect(self, rng: np.random.Generator, pairs: int = 3) -> float:
        worst = 0.0
        for _ in range(pairs):
            x = rng.standard_normal(self.packer.dim)
            y = rng.standard_normal(self.packer.dim)
            gx, gy = self.matvec(x), self.matvec(y)
            scale = max(np.linalg.norm(gx) * np.linalg.norm(y), np.linalg.norm(gy) * np.linalg.norm(x), 1e-300)
            worst = max(worst, abs(gx @ y - x @ gy) / scale)
        return worst

    def dense(self) -> np.ndarray:
        eye = np.eye(self.packer.dim)
        return np.column_stack([self.matvec(e) for e in eye])


def conjugate_gradient(matvec, b, x0=None, tol=1e-12, maxiter=500, report: GramianReport | None = None):
    """Plain CG that also tracks the smallest Rayleigh quotient p'Ap / p'p."""
    report = report if report is not None else GramianReport()
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        report.residual = 0.0
        return np.zeros_like(b), report
    r = b - matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    rs = r @ r
    it = 0
    while np.sqrt(rs) > tol * bnorm and it < maxiter:
        Ap = matvec(p)
        curv = p @ Ap
        report.min_rayleigh = min(report.min_rayleigh, curv / (p @ p))
        if curv <= 0:
            break
        alpha = rs / curv
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = r @ r
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    report.cg_iterations += it
    report.residual = float(np.linalg.norm(b - matvec(x)) / bnorm)
    if report.residual > max(tol, 1e-14) * 10 and it >= maxiter:
        raise GramianIllConditioned(
            f"CG did not converge in {maxiter} iterations (relative residual {report.residual:.2e}); "
            "the grid is too fine for the horizon or the actuator arc is too small"
        )
    return x, report


class GramianSolver:
    """Solves Gamma p = b by CG, with a normal-equations fallback if Gamma is not symmetric."""

    SYMMETRY_LIMIT = 1e-6

    def __init__(self, gramian: HumGramian, tol: float = 1e-12, maxiter: int = 500, seed: int = 0):
        self.gramian = gramian
        self.tol = tol
        self.maxiter = maxiter
        self.report = GramianReport()
        self.report.symmetry_defect = gramian.symmetry_defect(np.random.default_rng(seed))
        self._dense = None
        if self.report.symmetry_defect > self.SYMMETRY_LIMIT:
            logger.warning("Gramian symmetry defect %.2e; using normal equations", self.report.symmetry_defect)
            self.report.fallback = True
            self._dense = gramian.dense()

    def solve(self, b: np.ndarray, x0=None) -> np.ndarray:
        if self._dense is not None:
            A = self._dense
            x, _ = conjugate_gradient(lambda y: A.T @ (A @ y), A.T @ b, x0, self.tol, self.maxiter, self.report)
            self.report.residual = float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300))
            return x
        x, _ = conjugate_gradient(self.gramian.matvec, b, x0, self.tol, self.maxiter, self.report)
        return x


def hum_forward_map(phi0: SpectralField, psi0: SpectralField, problem: ControlProblem):
    """Initial state (u_L(0), v_L(0)) of the controlled linear system driven
    by the controls of costate (phi0, psi0) and brought to rest at time T."""
    gram = HumGramian(problem)
    pu, pv = gram.model.project_state(phi0.coeffs, psi0.coeffs)
    gu, gv = gram.apply_arrays(pu, pv)
    grid = problem.params.grid
    return (
        SpectralField(grid, gu, real=False, _validate=False),
        SpectralField(grid, symmetrize(gv), real=True, mean_zero=True, _validate=False),
    )


def _state_arrays(model: Model, state: WaveState):
    return model.project_state(*state.arrays())


def _linear_rhs_vector(gram: HumGramian, problem: ControlProblem):
    """x0 - E(-T) x_target in packed coordinates."""
    m = gram.model
    x0u, x0v = _state_arrays(m, problem.initial)
    tu, tv = _state_arrays(m, problem.target)
    bu, bv = m.flow.apply(tu, tv, -problem.T)
    return gram.packer.pack(x0u - bu, x0v - bv)


def terminal_distance(params, problem: ControlProblem, signal: ControlSignal, damped: bool = False) -> float:
    """Distance to the target after an independent forward solve of the controls."""
    traj = simulate(params, problem.initial, problem.T, problem.dt, forcing=signal, damped=damped)
    end = traj.final
    du = end.u.coeffs - problem.target.u.coeffs
    dv = end.v.coeffs - problem.target.v.coeffs
    return float(np.sqrt(np.sum(np.abs(du) ** 2) + np.sum(np.abs(dv) ** 2)))


def solve_linear_control(problem: ControlProblem, tol: float = 1e-12, maxiter: int = 500, verify: bool = True):
    """HUM controls steering the linearized system from initial to target."""
    lin = replace(problem, params=linearized(problem.params))
    gram = HumGramian(lin)
    b = _linear_rhs_vector(gram, lin)
    if np.linalg.norm(b) == 0.0:
        signal = ControlSignal.zeros(gram.model.N, lin.T, lin.dt)
        report = GramianReport(symmetry_defect=0.0)
        if verify:
            report.verified_residual = terminal_distance(lin.params, lin, signal)
        return signal, report
    solver = GramianSolver(gram, tol=tol, maxiter=maxiter)
    x = solver.solve(b)
    f, h = gram.controls(*gram.packer.unpack(x))
    signal = ControlSignal(f, h, lin.T, lin.dt)
    report = solver.report
    if verify:
        report.verified_residual = terminal_distance(lin.params, lin, signal)
    return signal, report


@dataclass
class LocalControlResult:
    signal: ControlSignal
    iterations: int
    differences: list = field(default_factory=list)
    terminal_residual: float | None = None
    gramian: GramianReport | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "differences": list(self.differences),
            "terminal_residual": self.terminal_residual,
            "gramian": self.gramian.to_dict() if self.gramian else None,
        }


def _forward_controlled(stepper: Stepper, uh, vh, fu, fv):
    """Undamped discrete solve with spectral forcing arrays; returns the final state."""
    for m in range(fu.shape[0]):
        uh, vh = stepper.step(uh, vh, False, fu[m], fv[m])
    return uh, vh


def nonlinear_local_control(
    problem: ControlProblem,
    delta: float = 0.1,
    K: int = 20,
    tol: float = 1e-10,
    cg_tol: float = 1e-13,
    verify: bool = True,
) -> LocalControlResult:
    """Controls of the nonlinear system from a fixed point of the HUM map.

    With N(p) the nonlinear remainder at time T (nonlinear minus linear
    terminal state under the controls of p), the iteration is

        p <- Gamma^{-1} (x0 - E(-T) (x_target - N(p))),

    i.e. p = S^{-1} x0 - S^{-1} K(p) with K(p) the remainder transported
    back to time 0 by the linear flow.  It contracts for small data.
    """
    x0_norm = problem.initial.norm()
    tgt_norm = problem.target.norm()
    if max(x0_norm, tgt_norm) >= delta:
        raise ValueError(f"data norm {max(x0_norm, tgt_norm):.3e} is not below delta = {delta}")
    gram = HumGramian(problem)
    model = gram.model
    stepper = gram.stepper
    packer = gram.packer
    x0u, x0v = _state_arrays(model, problem.initial)
    tu, tv = _state_arrays(model, problem.target)
    base = _linear_rhs_vector(gram, problem)
    result = LocalControlResult(ControlSignal.zeros(model.N, problem.T, problem.dt), 0)
    if np.linalg.norm(base) == 0.0 and np.linalg.norm(packer.pack(x0u, x0v)) == 0.0:
        result.iterations = 1
        result.differences = [0.0]
        if verify:
            result.terminal_residual = terminal_distance(problem.params, problem, result.signal)
        return result
    solver = GramianSolver(gram, tol=cg_tol, maxiter=2000)
    p = solver.solve(base)
    linear_only = problem.params.is_linear
    diffs = []
    converged = linear_only
    for j in range(K if not linear_only else 0):
        pu, pv = packer.unpack(p)
        fu, fv = gram.forcing(pu, pv)
        try:
            eu, ev = _forward_controlled(stepper, x0u, x0v, fu, fv)
        except BlowUpError as exc:
            raise LocalControlDivergence(
                f"controlled trajectory blew up at iteration {j + 1}: data too large for local control, shrink delta or T"
            ) from exc
        gu, gv = packer.unpack(gram.matvec(p))
        lu, lv = model.flow.apply(x0u - gu, x0v - gv, problem.T)
        ru, rv = model.flow.apply(eu - lu, ev - lv, -problem.T)
        p_new = solver.solve(base + packer.pack(ru, rv), x0=p)
        d = float(np.linalg.norm(p_new - p))
        diffs.append(d)
        p = p_new
        logger.debug("local control iteration %d: |dp| = %.3e", j + 1, d)
        if not np.isfinite(d) or (len(diffs) > 2 and d > diffs[-2] > diffs[-3]):
            break
        if d <= tol:
            converged = True
            break
    if not converged:
        raise LocalControlDivergence(
            f"fixed-point iteration did not converge in {K} iterations "
            f"(last step {diffs[-1] if diffs else float('nan'):.3e}): data too large for local control, shrink delta or T"
        )
    f, h = gram.controls(*packer.unpack(p))
    result.signal = ControlSignal(f, h, problem.T, problem.dt)
    result.iterations = max(len(diffs), 1)
    result.differences = diffs
    result.gramian = solver.report
    if verify:
        result.terminal_residual = terminal_distance(problem.params, problem, result.signal)
    return result


# ---------------------------------------------------------------------------
# global transfer


@dataclass
class TransferPhase:
    name: str
    duration: float
    signal: ControlSignal | None


@dataclass
class TransferResult:
    schedule: list
    signal: ControlSignal
    residual: float
    delta: float
    local: LocalControlResult | None = None
    energy_log: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "phases": [{"phase": p.name, "duration": p.duration} for p in self.schedule],
            "total_time": self.signal.T if self.signal is not None else 0.0,
            "residual": self.residual,
            "delta": self.delta,
            "local_control": self.local.to_dict() if self.local else None,
        }


def _damping_forcing(model: Model, yu, yv):
    """Spectral D y = (a^2 y_u, G G y_v), projected."""
    du = model.spec(model.a2 * model.phys(yu))
    dv = model.spec(model.G(model.G(model.phys(yv).real)))
    return model.project(du, dv)


def _controls_from_forcing(model: Model, yu, yv, sign: float):
    """Samples (f, h) whose forcing is sign * D y."""
    f = 1j * sign * model.a2 * model.phys(yu)
    h = sign * model.G(model.phys(yv).real)
    return f, h


def stabilize_segment(model: Model, stepper: Stepper, uh, vh, threshold: float, t_max: float):
    """Feedback damping applied as per-step open-loop forcing until E <= threshold."""
    fs, hs, energies = [], [], [float(np.sum(np.abs(uh) ** 2) + np.sum(np.abs(vh) ** 2))]
    max_steps = int(np.ceil(t_max / stepper.dt))
    while energies[-1] > threshold:
        if len(fs) >= max_steps:
            raise TransferTimeout(
                f"energy {energies[-1]:.3e} still above {threshold:.3e} after t = {t_max}: "
                "decay stalled, raise damping or check profiles"
            )
        yu, yv = stepper.half_flow(uh, vh)
        du, dv = _damping_forcing(model, yu, yv)
        f, h = _controls_from_forcing(model, yu, yv, -1.0)
        yu, yv = stepper.rk4(yu, yv, False, -du, -dv)
        uh, vh = stepper.half_flow(yu, yv)
        check_finite(uh, vh)
        fs.append(f)
        hs.append(h)
        energies.append(float(np.sum(np.abs(uh) ** 2) + np.sum(np.abs(vh) ** 2)))
    return uh, vh, fs, hs, energies


def _invert_step(model: Model, stepper: Stepper, uh, vh, iters: int = 50, tol: float = 1e-15):
    """State x with step(x; forcing = +D E(dt/2) x) = (uh, vh), by fixed-point iteration."""
    zu, zv = stepper.half_flow(uh, vh, -1.0)
    yu, yv = zu, zv
    for _ in range(iters):
        du, dv = _damping_forcing(model, yu, yv)
        ru, rv = stepper.rk4(yu, yv, False, du, dv)
        cu, cv = zu - ru, zv - rv
        yu, yv = yu + cu, yv + cv
        if np.sqrt(np.sum(np.abs(cu) ** 2) + np.sum(np.abs(cv) ** 2)) <= tol * max(1.0, np.linalg.norm(zu)):
            break
    xu, xv = stepper.half_flow(yu, yv, -1.0)
    return xu, xv, yu, yv


def reverse_segment(model: Model, stepper: Stepper, uh, vh, threshold: float, t_max: float):
    """Trace back from (uh, vh) the anti-damped forward dynamics until E <= threshold.

    Returns the small starting state and the forward-ordered controls that
    carry it exactly onto (uh, vh).
    """
    fs, hs, energies = [], [], [float(np.sum(np.abs(uh) ** 2) + np.sum(np.abs(vh) ** 2))]
    max_steps = int(np.ceil(t_max / stepper.dt))
    while energies[-1] > threshold:
        if len(fs) >= max_steps:
            raise TransferTimeout(
                f"backward decay stalled at energy {energies[-1]:.3e} after t = {t_max}"
            )
        uh, vh, yu, yv = _invert_step(model, stepper, uh, vh)
        check_finite(uh, vh)
        f, h = _controls_from_forcing(model, yu, yv, 1.0)
        fs.append(f)
        hs.append(h)
        energies.append(float(np.sum(np.abs(uh) ** 2) + np.sum(np.abs(vh) ** 2)))
    return uh, vh, fs[::-1], hs[::-1], energies[::-1]


def global_transfer(
    u0: SpectralField,
    v0: SpectralField,
    u1: SpectralField,
    v1: SpectralField,
    params: SystemParams,
    tol: float = 1e-4,
    dt: float = 2e-3,
    delta: float = 0.05,
    T_local: float = 1.0,
    t_max: float = 400.0,
    verify: bool = True,
) -> TransferResult:
    """Open-loop controls carrying (u0, v0) to (u1, v1).

    v0 and v1 are real fields including their (equal) means.  The schedule
    is: feedback damping from the start state down to energy delta^2; local
    nonlinear control across the small states; and the anti-damped
    trajectory that ends at the target, traced back from the target and
    replayed forward.
    """
    grid = params.grid
    m0 = float(v0.coeffs[0].real)
    m1 = float(v1.coeffs[0].real)
    if abs(m0 - m1) > 1e-12:
        raise ValueError("start and end states must have the same mean of v")
    start = WaveState.from_arrays(grid, u0.coeffs, v0.coeffs, 0.0, m0)
    end = WaveState.from_arrays(grid, u1.coeffs, v1.coeffs, 0.0, m0)
    model = Model(params, m0)
    stepper = Stepper(model, dt)
    threshold = delta ** 2
    xu, xv = _state_arrays(model, start)
    yu, yv = _state_arrays(model, end)

    au, av, f1, h1, e1 = stabilize_segment(model, stepper, xu, xv, threshold, t_max)
    bu, bv, f2, h2, e2 = reverse_segment(model, stepper, yu, yv, threshold, t_max)
    A = WaveState.from_arrays(grid, au, av, 0.0, m0)
    B = WaveState.from_arrays(grid, bu, bv, 0.0, m0)
    local_problem = ControlProblem(params, A, B, T_local, dt)
    local = nonlinear_local_control(local_problem, delta=max(delta * 1.5, 1e-12), verify=False)

    schedule = []
    signals = []
    if f1:
        s1 = ControlSignal(np.array(f1), np.array(h1), len(f1) * dt, dt)
        schedule.append(TransferPhase("stabilize", s1.T, s1))
        signals.append(s1)
    schedule.append(TransferPhase("local", T_local, local.signal))
    signals.append(local.signal)
    if f2:
        s2 = ControlSignal(np.array(f2), np.array(h2), len(f2) * dt, dt)
        schedule.append(TransferPhase("track", s2.T, s2))
        signals.append(s2)
    signal = ControlSignal.concatenate(signals)
    residual = float("nan")
    if verify:
        traj = simulate(params, start, signal.T, dt, forcing=signal, damped=False, record_every=max(1, signal.f.shape[0]))
        fin = traj.final
        tu, tv = _state_arrays(model, end)
        residual = float(np.sqrt(np.sum(np.abs(fin.u.coeffs - tu) ** 2) + np.sum(np.abs(fin.v.coeffs - tv) ** 2)))
        if residual > tol:
            logger.warning("transfer residual %.3e exceeds tolerance %.1e", residual, tol)
    return TransferResult(schedule, signal, residual, delta, local, {"stabilize": e1, "track": e2})
