import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlskdv.spectral import (
    SpectralField,
    derivative,
    fractional_D,
    inner,
    integral,
    l2_norm,
    make_grid,
    project_zero_mean,
    resample,
    sobolev_norm,
    to_physical,
    to_spectral,
)

from .conftest import random_complex, random_real

even_N = st.integers(2, 256).map(lambda k: 2 * k)
seeds = st.integers(0, 2 ** 32 - 1)


class TestGrid:
    def test_n4(self):
        g = make_grid(4)
        assert np.allclose(g.points, [0, np.pi / 2, np.pi, 3 * np.pi / 2])
        assert sorted(g.wavenumbers) == [-2, -1, 0, 1]

    def test_n8_point(self):
        assert make_grid(8).points[3] == pytest.approx(3 * np.pi / 4)

    def test_odd_rejected(self):
        with pytest.raises(ValueError, match="N must be even"):
            make_grid(5)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            make_grid(2)

    def test_dealias_cutoff(self):
        assert make_grid(32).dealias_cutoff == 10
        assert make_grid(64).dealias_cutoff == 21


class TestTransform:
    def test_constant(self):
        g = make_grid(16)
        f = to_spectral(np.full(16, 2.5), g)
        assert f.coeffs[0] == pytest.approx(2.5)
        assert np.max(np.abs(f.coeffs[1:])) < 1e-15

    def test_single_exponential(self):
        g = make_grid(16)
        f = to_spectral(np.exp(1j * g.points), g)
        assert f.coeffs[1] == pytest.approx(1.0)
        mask = np.ones(16, bool)
        mask[1] = False
        assert np.max(np.abs(f.coeffs[mask])) < 1e-15

    def test_round_trip_n16(self, rng):
        g = make_grid(16)
        s = random_complex(rng, g)
        assert np.max(np.abs(to_physical(to_spectral(s, g)) - s)) <= 1e-13

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            to_spectral(np.zeros(7), make_grid(8))

    @settings(max_examples=40, deadline=None)
    @given(N=st.sampled_from([4, 8, 64, 512, 4096]), seed=seeds)
    def test_round_trip_relative(self, N, seed):
        rng = np.random.default_rng(seed)
        g = make_grid(N)
        s = random_complex(rng, g)
        err = np.max(np.abs(to_physical(to_spectral(s, g)) - s)) / np.max(np.abs(s))
        assert err <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(N=even_N, seed=seeds)
    def test_parseval(self, N, seed):
        rng = np.random.default_rng(seed)
        g = make_grid(N)
        s = random_complex(rng, g)
        lhs = np.mean(np.abs(s) ** 2)
        assert abs(l2_norm(to_spectral(s, g)) ** 2 - lhs) <= 1e-12 * lhs

    def test_real_samples_give_real_field(self, rng):
        g = make_grid(32)
        f = to_spectral(random_real(rng, g), g)
        assert f.real
        assert to_physical(f).dtype == float


class TestDerivative:
    def test_sin_to_cos(self):
        g = make_grid(32)
        d = derivative(to_spectral(np.sin(g.points), g), 1)
        assert np.max(np.abs(to_physical(d) - np.cos(g.points))) < 1e-13

    def test_third_derivative_of_exponential(self):
        g = make_grid(32)
        d = derivative(to_spectral(np.exp(2j * g.points), g), 3)
        assert np.max(np.abs(to_physical(d) + 8j * np.exp(2j * g.points))) < 1e-12

    @pytest.mark.parametrize("p", [1, 2, 3, 5])
    def test_constant_annihilated(self, p):
        g = make_grid(16)
        assert np.max(np.abs(derivative(to_spectral(np.full(16, 3.0), g), p).coeffs)) == 0.0

    def test_nyquist_dropped_for_odd(self):
        g = make_grid(8)
        f = to_spectral(np.cos(4 * g.points), g)
        assert np.max(np.abs(derivative(f, 1).coeffs)) == 0.0
        assert np.max(np.abs(derivative(f, 2).coeffs)) > 0.0

    @settings(max_examples=30, deadline=None)
    @given(N=even_N, seed=seeds)
    def test_skew_adjoint(self, N, seed):
        rng = np.random.default_rng(seed)
        g = make_grid(N)
        f = to_spectral(random_real(rng, g, True), g, mean_zero=True)
        h = to_spectral(random_real(rng, g, True), g, mean_zero=True)
        scale = sobolev_norm(f, 1) * sobolev_norm(h, 1)
        assert abs(inner(derivative(f), h) + inner(f, derivative(h))) <= 1e-12 * max(scale, 1.0)


class TestFractional:
    def test_inverse_on_unit_mode(self):
        g = make_grid(16)
        f = to_spectral(np.exp(1j * g.points), g)
        assert np.allclose(fractional_D(f, -1).coeffs, f.coeffs)

    @pytest.mark.parametrize("r", [-1.5, 0.3, 2.0])
    def test_constant_fixed(self, r):
        g = make_grid(16)
        f = to_spectral(np.full(16, 1.7), g)
        assert np.allclose(fractional_D(f, r).coeffs, f.coeffs)

    def test_square(self):
        g = make_grid(16)
        f = to_spectral(np.exp(3j * g.points), g)
        assert np.max(np.abs(to_physical(fractional_D(f, 2)) - 9 * np.exp(3j * g.points))) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, r=st.floats(-2, 2), p=st.integers(0, 3))
    def test_commutes_with_derivative(self, seed, r, p):
        rng = np.random.default_rng(seed)
        g = make_grid(32)
        f = to_spectral(random_complex(rng, g), g)
        a = fractional_D(derivative(f, p), r).coeffs
        b = derivative(fractional_D(f, r), p).coeffs
        assert np.max(np.abs(a - b)) <= 1e-13 * max(1.0, np.max(np.abs(a)))


class TestSobolev:
    def test_s0_is_l2(self, rng):
        g = make_grid(32)
        s = random_complex(rng, g)
        assert sobolev_norm(to_spectral(s, g), 0) == pytest.approx(np.sqrt(np.mean(np.abs(s) ** 2)), rel=1e-13)

    def test_unit_mode_s1(self):
        g = make_grid(16)
        assert sobolev_norm(to_spectral(np.exp(1j * g.points), g), 1) == pytest.approx(np.sqrt(2), rel=1e-14)

    def test_brute_force_s2(self, rng):
        g = make_grid(32)
        s = random_complex(rng, g)
        total = 0.0
        for n in range(-16, 16):
            c = np.sum(s * np.exp(-1j * n * g.points)) / 32
            total += (1 + n * n) ** 2 * abs(c) ** 2
        assert sobolev_norm(to_spectral(s, g), 2) == pytest.approx(np.sqrt(total), rel=1e-12)


class TestProjection:
    def test_constant_removed(self):
        g = make_grid(16)
        assert np.max(np.abs(project_zero_mean(to_spectral(np.full(16, 4.0), g)).coeffs)) == 0.0

    def test_one_plus_sin(self):
        g = make_grid(16)
        p = project_zero_mean(to_spectral(1 + np.sin(g.points), g))
        assert np.max(np.abs(to_physical(p) - np.sin(g.points))) < 1e-14
        assert p.mean_zero

    @settings(max_examples=30, deadline=None)
    @given(N=even_N, seed=seeds)
    def test_idempotent_orthogonal(self, N, seed):
        rng = np.random.default_rng(seed)
        g = make_grid(N)
        f = to_spectral(random_complex(rng, g), g)
        p = project_zero_mean(f)
        assert np.max(np.abs(project_zero_mean(p).coeffs - p.coeffs)) <= 1e-14
        assert abs(inner(p, f - p)) <= 1e-14

    def test_integral(self):
        g = make_grid(16)
        assert integral(to_spectral(np.full(16, 2.0), g)) == pytest.approx(4 * np.pi)


class TestResample:
    def test_round_trip_through_finer_grid(self, rng):
        g = make_grid(16)
        c = random_complex(rng, g)
        c[8] = 0.0
        f = SpectralField(g, c)
        back = resample(resample(f, make_grid(64)), g)
        assert np.allclose(back.coeffs, f.coeffs, atol=1e-14)
