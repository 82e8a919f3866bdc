import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlskdv.control import (
    ControlProblem,
    GramianIllConditioned,
    GramianReport,
    GramianSolver,
    HumGramian,
    LocalControlDivergence,
    StatePacker,
    TransferTimeout,
    adjoint_free_flow,
    conjugate_gradient,
    global_transfer,
    hum_forward_map,
    nonlinear_local_control,
    solve_linear_control,
    time_window,
)
from nlskdv.dynamics import Model, WaveState, random_state, simulate
from nlskdv.operators import apply_G_samples, arc_offset
from nlskdv.spectral import SpectralField, make_grid

from .conftest import make_params

seeds = st.integers(0, 2 ** 32 - 1)


def problem_for(params, initial, target=None, T=1.0, dt=0.01):
    target = target if target is not None else WaveState.zero(params.grid, initial.v_mean)
    return ControlProblem(params, initial, target, T, dt)


def full_v(state):
    c = np.array(state.v.coeffs)
    c[0] = state.v_mean
    return SpectralField(state.grid, c, real=True)


class TestWindow:
    def test_plateau_and_edges(self):
        T = 1.2
        t = np.linspace(0, T, 1201)
        w = time_window(t, T)
        assert np.all(w[(t >= T / 3) & (t <= 2 * T / 3)] == 1.0)
        assert np.all(w[t <= T / 12] == 0.0)
        assert np.all(w[t >= 11 * T / 12] == 0.0)
        assert np.all((w >= 0) & (w <= 1))


class TestAdjointFlow:
    def setup_method(self):
        self.grid = make_grid(32)
        st_ = random_state(self.grid, np.random.default_rng(3))
        self.phi, self.psi = st_.u, st_.v

    def test_identity_at_zero(self):
        phi, psi = adjoint_free_flow(self.phi, self.psi, 0.0, 0.5)
        assert np.array_equal(phi.coeffs, self.phi.coeffs)
        assert np.array_equal(psi.coeffs, self.psi.coeffs)

    def test_isometry(self):
        phi, psi = adjoint_free_flow(self.phi, self.psi, 0.83, 0.5)
        assert abs(phi.norm() - self.phi.norm()) <= 1e-13
        assert abs(psi.norm() - self.psi.norm()) <= 1e-13

    def test_composition(self):
        a = adjoint_free_flow(*adjoint_free_flow(self.phi, self.psi, 0.3, 1.0), 0.45, 1.0)
        b = adjoint_free_flow(self.phi, self.psi, 0.75, 1.0)
        assert np.max(np.abs(a[0].coeffs - b[0].coeffs)) <= 1e-13
        assert np.max(np.abs(a[1].coeffs - b[1].coeffs)) <= 1e-13

    def test_rejects_mean(self):
        c = np.zeros(32, complex)
        c[0] = 1.0
        with pytest.raises(ValueError):
            adjoint_free_flow(self.phi, SpectralField(self.grid, c, real=True), 0.1)


class TestPacker:
    @settings(max_examples=30, deadline=None)
    @given(seed=seeds)
    def test_round_trip_and_inner_product(self, seed):
        rng = np.random.default_rng(seed)
        m = Model(make_params(32))
        p = StatePacker(m)
        a = random_state(m.grid, rng, width=20.0)
        b = random_state(m.grid, rng, width=20.0)
        au, av = m.project_state(*a.arrays())
        bu, bv = m.project_state(*b.arrays())
        u, v = p.unpack(p.pack(au, av))
        assert np.max(np.abs(u - au)) <= 1e-15 and np.max(np.abs(v - av)) <= 1e-15
        l2 = np.real(np.vdot(bu, au) + np.vdot(bv, av))
        assert abs(p.pack(au, av) @ p.pack(bu, bv) - l2) <= 1e-14


class TestGramian:
    def setup_method(self):
        self.params = make_params(16, beta=0.0, quadratic=False)
        self.problem = problem_for(self.params, WaveState.zero(self.params.grid))
        self.gram = HumGramian(self.problem)

    def test_zero_costate(self):
        z = WaveState.zero(self.params.grid)
        u, v = hum_forward_map(z.u, z.v, self.problem)
        assert np.max(np.abs(u.coeffs)) == 0.0 and np.max(np.abs(v.coeffs)) == 0.0

    def test_output_mean_zero(self, rng):
        s = random_state(self.params.grid, rng)
        _, v = hum_forward_map(s.u, s.v, self.problem)
        assert abs(v.coeffs[0]) <= 1e-13

    def test_symmetry_on_random_pairs(self, rng):
        for _ in range(5):
            x = random_state(self.params.grid, rng, width=20.0)
            y = random_state(self.params.grid, rng, width=20.0)
            sx = hum_forward_map(x.u, x.v, self.problem)
            sy = hum_forward_map(y.u, y.v, self.problem)
            lhs = np.real(np.vdot(y.u.coeffs, sx[0].coeffs) + np.vdot(y.v.coeffs, sx[1].coeffs))
            rhs = np.real(np.vdot(sy[0].coeffs, x.u.coeffs) + np.vdot(sy[1].coeffs, x.v.coeffs))
            assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), 1e-30)

    def test_rayleigh_nonnegative(self, rng):
        for _ in range(200):
            x = rng.standard_normal(self.gram.packer.dim)
            assert x @ self.gram.matvec(x) / (x @ x) > 0.0

    def test_dense_is_spd(self):
        A = self.gram.dense()
        assert np.max(np.abs(A - A.T)) <= 1e-12 * np.max(np.abs(A))
        assert np.min(np.linalg.eigvalsh(0.5 * (A + A.T))) > 0.0


class TestConjugateGradient:
    def test_matches_direct_solve(self, rng):
        B = rng.standard_normal((20, 20))
        A = B @ B.T + 20 * np.eye(20)
        b = rng.standard_normal(20)
        x, rep = conjugate_gradient(lambda y: A @ y, b, tol=1e-13)
        assert np.allclose(x, np.linalg.solve(A, b), atol=1e-11)
        assert rep.min_rayleigh >= np.min(np.linalg.eigvalsh(A)) * (1 - 1e-12)

    def test_zero_rhs(self):
        x, rep = conjugate_gradient(lambda y: y, np.zeros(4))
        assert np.all(x == 0) and rep.cg_iterations == 0

    def test_divergence_signalled(self, rng):
        A = np.diag(np.logspace(-8, 0, 50))
        with pytest.raises(GramianIllConditioned):
            conjugate_gradient(lambda y: A @ y, rng.standard_normal(50), tol=1e-14, maxiter=3)

    def test_fallback_on_asymmetry(self, rng):
        A = np.eye(6) + np.triu(rng.standard_normal((6, 6)), 1)

        class Skewed:
            def matvec(self, x):
                return A @ x

            def symmetry_defect(self, rng):
                return 1.0

            def dense(self):
                return A

        b = rng.standard_normal(6)
        solver = GramianSolver(Skewed(), tol=1e-14)
        x = solver.solve(b)
        assert solver.report.fallback
        assert np.allclose(A @ x, b, atol=1e-10)


class TestLinearControl:
    def test_zero_data(self, params32):
        sig, rep = solve_linear_control(problem_for(params32, WaveState.zero(params32.grid)))
        assert rep.cg_iterations == 0
        assert np.max(np.abs(sig.f)) == 0.0 and np.max(np.abs(sig.h)) == 0.0
        assert rep.verified_residual == 0.0

    def test_steers_to_rest(self, rng, params32):
        x0 = random_state(params32.grid, rng, v_mean=0.2)
        sig, rep = solve_linear_control(problem_for(params32, x0))
        assert rep.verified_residual <= 1e-8 * x0.norm()
        assert rep.cg_iterations <= 500

    def test_steers_between_states(self, rng, params32):
        a = random_state(params32.grid, rng, norm=0.5)
        b = random_state(params32.grid, rng, norm=0.5)
        sig, rep = solve_linear_control(problem_for(params32, a, b))
        assert rep.verified_residual <= 1e-8

    def test_support_in_arc(self, rng, params32):
        sig, _ = solve_linear_control(problem_for(params32, random_state(params32.grid, rng)))
        prof = params32.profile
        outside = np.abs(arc_offset(prof.grid.points, prof.center)) >= prof.half_width
        gh = apply_G_samples(prof.g_samples, sig.h, prof.grid.dx)
        assert np.max(np.abs(sig.f[:, outside])) <= 1e-12
        assert np.max(np.abs(gh[:, outside])) <= 1e-12

    def test_linearity(self, rng, params32):
        x0 = random_state(params32.grid, rng)
        x2 = WaveState.from_arrays(params32.grid, -2.5 * x0.u.coeffs, -2.5 * x0.v.coeffs)
        s1, _ = solve_linear_control(problem_for(params32, x0), verify=False)
        s2, _ = solve_linear_control(problem_for(params32, x2), verify=False)
        scale = np.max(np.abs(s2.f))
        assert np.max(np.abs(s2.f + 2.5 * s1.f)) <= 1e-9 * scale
        assert np.max(np.abs(s2.h + 2.5 * s1.h)) <= 1e-9 * np.max(np.abs(s2.h))

    def test_mean_budget(self, rng, params32):
        x0 = random_state(params32.grid, rng, v_mean=-0.4)
        prob = problem_for(params32, x0)
        sig, _ = solve_linear_control(prob, verify=False)
        traj = simulate(params32, x0, prob.T, prob.dt, forcing=sig, damped=False)
        assert np.max(np.abs(traj.v_means() - traj.v_means()[0])) <= 1e-12

    def test_longer_horizon_no_more_iterations(self, rng, params32):
        x0 = random_state(params32.grid, rng)
        _, r1 = solve_linear_control(problem_for(params32, x0, T=1.0), verify=False)
        _, r2 = solve_linear_control(problem_for(params32, x0, T=2.0), verify=False)
        assert r2.cg_iterations <= r1.cg_iterations

    def test_mismatched_means_rejected(self, params32):
        with pytest.raises(ValueError):
            ControlProblem(params32, WaveState.zero(params32.grid, 0.1), WaveState.zero(params32.grid, 0.2))


class TestNonlinearControl:
    def test_zero_data(self, params32):
        res = nonlinear_local_control(problem_for(params32, WaveState.zero(params32.grid)))
        assert res.iterations == 1
        assert np.max(np.abs(res.signal.f)) == 0.0
        assert res.terminal_residual == 0.0

    def test_linear_system_reduces_to_hum(self, rng):
        params = make_params(32, beta=0.0, quadratic=False)
        prob = problem_for(params, random_state(params.grid, rng, norm=0.05))
        res = nonlinear_local_control(prob, cg_tol=1e-12)
        sig, _ = solve_linear_control(prob, verify=False)
        assert np.max(np.abs(res.signal.f - sig.f)) <= 1e-12
        assert np.max(np.abs(res.signal.h - sig.h)) <= 1e-12

    def test_small_data(self, rng, params32):
        res = nonlinear_local_control(problem_for(params32, random_state(params32.grid, rng, norm=1e-2, v_mean=0.1)))
        assert res.iterations <= 20
        assert res.differences[-1] <= 1e-10
        assert res.terminal_residual <= 1e-6

    def test_large_data_rejected(self, rng, params32):
        with pytest.raises(ValueError):
            nonlinear_local_control(problem_for(params32, random_state(params32.grid, rng, norm=0.5)), delta=0.1)

    def test_divergence_signalled(self, rng):
        params = make_params(32, beta=40.0)
        prob = problem_for(params, random_state(params.grid, rng, norm=2.0, width=4.0))
        with pytest.raises(LocalControlDivergence):
            nonlinear_local_control(prob, delta=10.0, K=6, verify=False)


class TestTransfer:
    def test_target_at_rest(self, rng, params32):
        a = random_state(params32.grid, rng, norm=0.3, v_mean=0.2)
        b = WaveState.zero(params32.grid, 0.2)
        res = global_transfer(a.u, full_v(a), b.u, full_v(b), params32, dt=5e-3)
        assert [p.name for p in res.schedule] == ["stabilize", "local"]
        assert res.residual <= 1e-4

    def test_small_identical_endpoints(self, rng, params32):
        a = random_state(params32.grid, rng, norm=0.01)
        res = global_transfer(a.u, full_v(a), a.u, full_v(a), params32, dt=5e-3)
        assert [p.name for p in res.schedule] == ["local"]
        assert res.residual <= 1e-8

    def test_nonzero_target(self, rng, params32):
        a = random_state(params32.grid, rng, norm=0.3, v_mean=-0.1)
        b = random_state(params32.grid, rng, norm=0.3, v_mean=-0.1)
        res = global_transfer(a.u, full_v(a), b.u, full_v(b), params32, dt=5e-3)
        assert [p.name for p in res.schedule] == ["stabilize", "local", "track"]
        assert res.residual <= 1e-4
        assert res.to_dict()["total_time"] == pytest.approx(sum(p.duration for p in res.schedule))

    def test_means_must_match(self, rng, params32):
        a = random_state(params32.grid, rng, v_mean=0.1)
        b = random_state(params32.grid, rng, v_mean=0.2)
        with pytest.raises(ValueError):
            global_transfer(a.u, full_v(a), b.u, full_v(b), params32)

    def test_timeout(self, rng, params32):
        a = random_state(params32.grid, rng, norm=1.0)
        b = WaveState.zero(params32.grid)
        with pytest.raises(TransferTimeout):
            global_transfer(a.u, full_v(a), b.u, full_v(b), params32, dt=5e-3, t_max=0.1)
