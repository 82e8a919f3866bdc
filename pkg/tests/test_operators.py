import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlskdv.operators import (
    SystemParams,
    apply_damping,
    apply_G,
    apply_G_star,
    arc_offset,
    bound_H,
    build_profiles,
    phase_airy,
    phase_schrodinger,
)
from nlskdv.spectral import inner, integral, make_grid, to_physical, to_spectral

from .conftest import random_complex, random_real

seeds = st.integers(0, 2 ** 32 - 1)


def quadrature_G(g, h, dx):
    """Loop-based trapezoid evaluation of g(x) (h(x) - int g h)."""
    avg = 0.0
    for j in range(len(h)):
        avg += g[j] * h[j] * dx
    return np.array([g[j] * (h[j] - avg) for j in range(len(h))])


class TestProfiles:
    def test_a2_floor_on_arc(self):
        grid = make_grid(64)
        prof = build_profiles(grid, center=np.pi, half_width=np.pi / 2, eta=0.5)
        assert np.min(prof.a2_samples[prof.in_arc]) >= 0.5

    def test_a2_vanishes_off_arc(self):
        prof = build_profiles(make_grid(64))
        assert np.all(prof.a2_samples[~prof.in_arc] == 0.0)

    @pytest.mark.parametrize("N", [16, 32, 128])
    def test_g_unit_integral(self, N):
        prof = build_profiles(make_grid(N))
        assert abs(np.sum(prof.g_samples) * prof.grid.dx - 1.0) <= 1e-10

    def test_max_at_center(self):
        grid = make_grid(64)
        prof = build_profiles(grid, center=np.pi)
        j = int(np.argmin(np.abs(arc_offset(grid.points, np.pi))))
        assert prof.a2_samples[j] == np.max(prof.a2_samples)
        assert prof.g_samples[j] == np.max(prof.g_samples)

    @pytest.mark.parametrize("kw", [{"half_width": 0.0}, {"half_width": np.pi}, {"eta": 0.0}, {"eta": -1.0}])
    def test_rejects_bad_arguments(self, kw):
        with pytest.raises(ValueError):
            build_profiles(make_grid(32), **kw)

    def test_round_trip_dict(self):
        prof = build_profiles(make_grid(32), center=1.0, half_width=0.5)
        again = type(prof).from_dict(prof.to_dict())
        assert np.array_equal(again.a2_samples, prof.a2_samples)


class TestG:
    def setup_method(self):
        self.grid = make_grid(32)
        self.prof = build_profiles(self.grid)

    def test_zero(self):
        out = apply_G(self.prof, to_spectral(np.zeros(32), self.grid))
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_constant_killed(self):
        out = apply_G(self.prof, to_spectral(np.full(32, 2.0), self.grid))
        assert np.max(np.abs(to_physical(out))) <= 1e-14

    def test_sin_against_quadrature(self):
        h = np.sin(self.grid.points)
        ref = quadrature_G(self.prof.g_samples, h, self.grid.dx)
        out = to_physical(apply_G(self.prof, to_spectral(h, self.grid)))
        assert np.max(np.abs(out - ref)) <= 1e-13

    def test_composition_against_quadrature(self):
        h = np.sin(self.grid.points)
        g = self.prof.g_samples
        ref = quadrature_G(g, quadrature_G(g, h, self.grid.dx), self.grid.dx)
        once = apply_G(self.prof, to_spectral(h, self.grid))
        out = to_physical(apply_G(self.prof, once))
        assert np.max(np.abs(out - ref)) <= 1e-12

    def test_star_is_identical(self, rng):
        h = to_spectral(random_real(rng, self.grid), self.grid)
        assert np.array_equal(apply_G(self.prof, h).coeffs, apply_G_star(self.prof, h).coeffs)

    def test_rejects_complex(self, rng):
        with pytest.raises(ValueError):
            apply_G(self.prof, to_spectral(random_complex(rng, self.grid), self.grid))

    def test_mean_zero_range_1000(self, rng):
        for _ in range(1000):
            h = to_spectral(random_real(rng, self.grid), self.grid)
            assert abs(integral(apply_G(self.prof, h))) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds, N=st.sampled_from([16, 32, 64]), hw=st.floats(0.3, 2.5))
    def test_self_adjoint(self, seed, N, hw):
        rng = np.random.default_rng(seed)
        grid = make_grid(N)
        prof = build_profiles(grid, half_width=hw)
        h1 = to_spectral(random_real(rng, grid), grid)
        h2 = to_spectral(random_real(rng, grid), grid)
        assert abs(inner(apply_G(prof, h1), h2) - inner(h1, apply_G(prof, h2))) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds)
    def test_bounded(self, seed):
        rng = np.random.default_rng(seed)
        h = random_real(rng, self.grid)
        g = self.prof.g_samples
        dx = self.grid.dx
        gh = to_physical(apply_G(self.prof, to_spectral(h, self.grid)))
        norm = lambda w: np.sqrt(dx * np.sum(w * w))
        assert norm(gh) <= (g.max() + norm(g) ** 2) * norm(h) * (1 + 1e-12)


class TestDamping:
    def test_identity_when_a_is_one(self, rng):
        grid = make_grid(32)
        prof = build_profiles(grid, half_width=np.pi - 1e-9, eta=1.0)
        ones = type(prof)(grid, prof.center, prof.half_width, 1.0, 1.0, np.ones(32), prof.g_samples)
        u = to_spectral(random_complex(rng, grid), grid)
        assert np.allclose(apply_damping(ones, u).coeffs, u.coeffs, atol=1e-15)

    def test_zero(self):
        grid = make_grid(32)
        out = apply_damping(build_profiles(grid), to_spectral(np.zeros(32, complex), grid))
        assert np.max(np.abs(out.coeffs)) == 0.0

    def test_dissipation_quadrature(self, rng):
        grid = make_grid(32)
        prof = build_profiles(grid)
        s = random_complex(rng, grid)
        u = to_spectral(s, grid)
        lhs = inner(apply_damping(prof, u) * (-1j), u).imag
        au2 = np.mean(prof.a2_samples * np.abs(s) ** 2)
        assert abs(lhs + au2) <= 1e-12


class TestPhases:
    def test_zero_mode(self):
        assert phase_schrodinger(0, 3.3) == 1.0
        assert phase_airy(0, 3.3, 1.0) == 1.0

    def test_schrodinger_at_pi(self):
        assert phase_schrodinger(1, np.pi) == pytest.approx(-1.0, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(-50, 50), t1=st.floats(-2, 2), t2=st.floats(-2, 2), mu=st.floats(-2, 2))
    def test_group_law(self, n, t1, t2, mu):
        assert abs(phase_schrodinger(n, t1 + t2) - phase_schrodinger(n, t1) * phase_schrodinger(n, t2)) <= 1e-14 * max(1, n * n * (abs(t1) + abs(t2)))
        d = abs(phase_airy(n, t1 + t2, mu) - phase_airy(n, t1, mu) * phase_airy(n, t2, mu))
        assert d <= 1e-14 * max(1, abs(n) ** 3 * (abs(t1) + abs(t2)))

    def test_unit_modulus(self):
        n = np.arange(-20, 21)
        assert np.allclose(np.abs(phase_airy(n, 0.7, 1.0)), 1.0)


class TestBoundH:
    def test_zero_mode(self):
        assert np.all(bound_H(0, np.linspace(-100, 100, 11), 0.0, 0.1) == 0.0)

    def test_worked_value(self):
        expected = 2.0 / (np.sqrt(65) * np.sqrt(17)) ** 0.4
        assert bound_H(2, 0.0, 0.0, 0.1) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.4925, abs=1e-4)

    @settings(max_examples=100, deadline=None)
    @given(n=st.integers(-300, 300), tau=st.floats(-1e8, 1e8), mu=st.floats(-3, 3), eps=st.floats(0.01, 0.49))
    def test_bounded_by_n(self, n, tau, mu, eps):
        assert bound_H(n, tau, mu, eps) <= abs(n) * (1 + 1e-15)

    @pytest.mark.parametrize("eps", [0.0, 0.5, -0.1])
    def test_rejects_eps(self, eps):
        with pytest.raises(ValueError):
            bound_H(1, 0.0, 0.0, eps)


class TestSystemParams:
    def test_rejects_dealias(self):
        with pytest.raises(ValueError):
            SystemParams(1.0, 0.0, build_profiles(make_grid(16)), dealias="half")

    def test_linear_flag(self):
        prof = build_profiles(make_grid(16))
        assert SystemParams(0.0, 0.0, prof, quadratic=False).is_linear
        assert not SystemParams(1.0, 0.0, prof).is_linear
