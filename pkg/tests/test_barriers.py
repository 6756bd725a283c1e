import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdblowup.barriers import (A0_of, BarrierPhi, C_psi, M0_of, SupersolutionVeta, WeightPsi,
                               barrier_for, fd_laplacian, laplacian_v_eta_m,
                               log_mass_threshold_radius, mass_threshold_radius, phi_barrier,
                               v_eta, verify_barrier)
from fdblowup.core import BoundaryProfile, make_grid, sphere_area
from fdblowup.errors import DomainError, ParameterError
from fdblowup.initial_data import build_u0
from fdblowup.solver import SolverConfig, run_regularized

from conftest import single_point


class TestA0:
    def test_worked_example(self):
        inner = (0.8 ** 2 * (0.2 * 3 + 1) * 3) + 2 * 0.8 * 2 + 2 * 1.2
        assert inner == pytest.approx(8.672)
        assert A0_of(0.2, 3, 3, 1) == pytest.approx((0.2 * inner / 0.8) ** 1.25)
        assert A0_of(0.2, 3, 3, 1) == pytest.approx(2.631, abs=1e-3)

    def test_large_lambda(self):
        assert A0_of(0.2, 3, 3, 1e6) == 1e6 + 1

    def test_monotone_in_gamma(self):
        g = np.linspace(2 / 0.8, 1 / 0.2, 200)
        a = [A0_of(0.2, 3, x, 1) for x in g]
        assert np.all(np.diff(a) >= 0)


class TestBarrier:
    def test_value(self):
        assert phi_barrier(1, 3, 0.5, 0.2)(np.array([0.25]), 0.0)[0] == pytest.approx(2048.0)

    def test_diverges_at_both_ends(self):
        b = phi_barrier(1, 3, 0.5, 0.2)
        assert b(np.array([0.5 * (1 - 1e-4)]), 0.0)[0] > 1e6
        assert b(np.array([0.5e-4]), 0.0)[0] > 1e6

    def test_domain(self):
        b = phi_barrier(1, 3, 0.5, 0.2)
        with pytest.raises(DomainError):
            b(np.array([0.5]), 0.0)
        with pytest.raises(DomainError):
            b(np.array([0.0]), 0.0)
        with pytest.raises(ParameterError):
            BarrierPhi(1, 3, 1.5, 0.2)

    def test_point_input(self):
        b = phi_barrier(1, 3, 0.5, 0.2, center=(0.1, 0, 0))
        assert b(np.array([[0.35, 0, 0]]), 0.0)[0] == pytest.approx(2048.0)

    def test_delta3_below_delta0(self, params3):
        with pytest.raises(ParameterError):
            barrier_for(params3, 0.34)

    @pytest.mark.parametrize("gamma", [2.6, 3.0, 4.0, 5.0])
    def test_dominates_initial_data(self, gamma):
        p = single_point(gamma=gamma)
        b = barrier_for(p, 0.25)
        r = np.linspace(1e-4, 0.25 * (1 - 1e-6), 10_000)
        assert np.all(b(r, 0.0) >= build_u0(p)(r) + 1)

    def test_solver_stays_below(self, params3, ball_grid):
        b = barrier_for(params3, 0.25)
        tr = run_regularized(params3, 1e-3, 1e4, BoundaryProfile.constant(1.0), 0.2, SolverConfig(),
                             ball_grid, [0.05, 0.1, 0.2])
        assert verify_barrier(tr, b) <= 1e-8


class TestSupersolution:
    def test_constant(self):
        s = SupersolutionVeta(3, 0.2, 1.0)
        x = np.random.default_rng(0).normal(size=(20, 3))
        assert np.allclose(v_eta(s, x), 1.0)
        assert np.all(laplacian_v_eta_m(s, x) == 0)

    def test_gamma_cap(self):
        with pytest.raises(ParameterError):
            SupersolutionVeta(3, 0.2, 1.0, (1.0,), (5.5,))
        SupersolutionVeta(3, 0.2, 1.0, (1.0,), (5.0,))

    def test_sign_example(self, rng):
        s = SupersolutionVeta(3, 0.2, 1.0, (1.0,), (3.0,), 0.01)
        assert np.all(laplacian_v_eta_m(s, rng.uniform(-1, 1, (100, 3))) < 0)

    @settings(max_examples=20)
    @given(st.integers(3, 6), st.floats(0.05, 0.95), st.floats(0.01, 1.0),
           st.floats(1e-4, 1.0), st.integers(0, 1000))
    def test_sign_property(self, n, frac, gfrac, eta, seed):
        m = frac * (n - 2) / n
        g = gfrac * (n - 2) / m
        rng = np.random.default_rng(seed)
        centers = tuple(tuple(c) for c in rng.uniform(-0.5, 0.5, (2, n)))
        s = SupersolutionVeta(n, m, 1.0, (1.0, 2.0), (g, g / 2), eta, centers)
        x = rng.uniform(-1, 1, (500, n))
        assert np.all(s.laplacian_m(x) <= 0)

    def test_sign_10k(self, rng):
        s = SupersolutionVeta(3, 0.2, 1.0, (1.0, 3.0), (5.0, 2.5), 1e-3, ((0, 0, 0), (0.3, 0, 0)))
        assert np.all(s.laplacian_m(rng.uniform(-1, 1, (10_000, 3))) <= 0)

    def test_fd_agreement(self, rng):
        s = SupersolutionVeta(3, 0.2, 1.0, (1.0,), (3.0,), 0.01)
        x = rng.uniform(-0.5, 0.5, (50, 3))
        exact = s.laplacian_m(x)
        e1 = np.max(np.abs(fd_laplacian(s.power_m, x, 1e-2) - exact) / np.abs(exact))
        e2 = np.max(np.abs(fd_laplacian(s.power_m, x, 5e-3) - exact) / np.abs(exact))
        assert e2 < 1e-2
        assert 3.0 < e1 / e2 < 5.0


class TestWeight:
    def test_I1_zero(self):
        assert WeightPsi(3, 0.2, 0.0, 3.0, 0.3, 0.1).I1() == 0.0

    def test_I1_example(self):
        w = WeightPsi(6, 0.2, 2.0, 3.0, 0.3, 0.1)
        assert sphere_area(6) == pytest.approx(math.pi ** 3)
        assert w.I1() == pytest.approx(math.pi ** 3 * 4 ** 1.25 / 1.5 * 0.1 ** 1.5)
        assert w.I1() == pytest.approx(3.70, abs=5e-3)

    def test_I1_quadrature(self):
        from scipy import integrate
        w = WeightPsi(6, 0.2, 2.0, 3.0, 0.3, 0.1)
        q = integrate.quad(lambda r: math.pi ** 3 * r ** 5 * float(w.integrand(r)), 0, 0.1)[0]
        assert q == pytest.approx(w.I1(), rel=1e-6)

    def test_profile(self):
        w = WeightPsi(3, 0.2, 0.4, 3.0, 0.3, 0.1)
        assert w.radial(0.05) == pytest.approx(0.05 ** -0.4)
        assert w.radial(0.1) == pytest.approx(0.1 ** -0.4)
        assert w.radial(0.1 + 1e-9) == pytest.approx(0.1 ** -0.4, rel=1e-6)
        assert w.radial(0.3) == 0.0 and w.radial(0.5) == 0.0

    def test_bump_derivative_bounds(self):
        w = WeightPsi(3, 0.2, 0.0, 3.0, 0.3, 0.1)
        r = np.linspace(0.1, 0.3, 100_001)
        _, dq, d2q = w._q(r)
        assert np.max(np.abs(dq)) <= 8 / (3 * math.sqrt(3)) / 0.2 * (1 + 1e-9)
        assert np.max(np.abs(d2q)) <= 8 / 0.2 ** 2 * (1 + 1e-9)

    def test_bad_parameters(self):
        with pytest.raises(ParameterError):
            WeightPsi(3, 0.2, 0.5, 3.0, 0.3, 0.1)
        with pytest.raises(ParameterError):
            WeightPsi(3, 0.2, 0.0, 2.5, 0.3, 0.1)
        with pytest.raises(ParameterError):
            WeightPsi(3, 0.2, 0.0, 3.0, 0.1, 0.3)

    def test_C_psi_bounds_quadrature_example(self):
        w = WeightPsi(3, 0.2, 0.0, 3.0, 0.3, 0.15)
        assert C_psi(w) >= w.quadrature() > 0

    def test_C_psi_bounds_quadrature_random(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(3, 7))
            m = rng.uniform(0.05, 0.9) * (n - 2) / n
            p = 2 / (1 - m)
            beta = rng.uniform(0, 0.9) * max(n - p, 0)
            d1 = rng.uniform(0.2, 1.0)
            w = WeightPsi(n, m, beta, p + rng.uniform(0.1, 3), d1, d1 * rng.uniform(0.1, 0.9))
            assert C_psi(w) >= w.quadrature()


class TestMassThreshold:
    def test_log_branch(self):
        d = mass_threshold_radius(3, 1.0, 2.5, 0.5, 1.0, 1.0, 0.1)
        assert d == pytest.approx(0.1 * math.exp(-math.e / (4 * math.pi)))
        # hand value 0.1*0.8056 rounds exp(-e/(4 pi)) = 0.80548 up
        assert d == pytest.approx(0.08056, abs=2e-5)
        assert d ** -3 == pytest.approx(1.91e3, rel=2e-3)

    def test_power_branch(self):
        d = mass_threshold_radius(3, 1.0, 4.0, 0.0, 1.0, 1.0, 0.1)
        assert d == pytest.approx(1 / (4 * math.e / (4 * math.pi) + 10))
        assert d == pytest.approx(0.09205, abs=1e-4)
        assert d ** -4 == pytest.approx(1.39e4, rel=3e-3)

    def test_too_small(self):
        with pytest.raises(ParameterError):
            log_mass_threshold_radius(3, 1.0, 2.5, 0.0, 1.0, 1.0, 0.1)

    def test_M0_needs_matching_beta(self):
        p = single_point(gamma=4.0)
        with pytest.raises(ParameterError):
            M0_of(1.0, 1.0, p, WeightPsi(3, 0.2, 0.5, 3.0, 0.3, 0.15))

    def test_M0_non_increasing_in_lambda(self):
        w = WeightPsi(3, 0.2, 0.0, 3.0, 0.3, 0.15)
        vals = [M0_of(1.0, 1.0, single_point(lam=lam, gamma=4.0), w) for lam in np.geomspace(0.1, 100, 30)]
        assert all(np.isfinite(vals))
        assert np.all(np.diff(vals) <= 0)

    def test_M0_overflow_is_inf(self):
        w = WeightPsi(3, 0.2, 0.0, 3.0, 0.3, 0.15)
        assert M0_of(1.0, 1.0, single_point(gamma=3.0), w) == math.inf
