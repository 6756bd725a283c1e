import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdblowup.barriers import WeightPsi
from fdblowup.core import (BLOWUP, CONVERGE_HARMONIC, Annulus, Ball, BoundaryProfile, Field,
                           ModelParams, Trajectory, make_grid, probe_mask)
from fdblowup.diagnostics import (blowup_monitor, check_aronson_benilan, check_comparison,
                                  check_L1_contraction, convergence_monitor, empirical_regime,
                                  eventually_decreasing, fit_blowup_exponent,
                                  gradient_scaling_check, initial_trace_check,
                                  laplacian_probe_residual, non_increasing, strictly_increasing,
                                  time_derivative_scaling_check, truncation_bounds,
                                  weighted_mass_check)
from fdblowup.errors import DiagnosticError, ParameterError, ShapeError
from fdblowup.harmonic import default_window, harmonic_limit
from fdblowup.initial_data import ConstantProfile, build_u0
from fdblowup.solver import SolverConfig, exact_singular_solution, run_regularized

from conftest import single_point

CFG = SolverConfig()
F1 = BoundaryProfile.constant(1.0)


def constant_traj(grid, c=1.0, times=(0.0, 0.5, 1.0)):
    return Trajectory(grid, np.array(times), np.full((len(times), grid.size), c))


@pytest.fixture(scope="module")
def gamma3_run():
    p = single_point()
    g = make_grid(p.domain, 3, nodes=200)
    return p, run_regularized(p, 1e-3, 1e9, F1, 1.0, CFG, g, [5e-4, 1e-3, 0.1, 0.25, 0.5])


class TestExponentFit:
    def test_power_law(self, ball_grid):
        fit = fit_blowup_exponent(Field(ball_grid, 2.0 * ball_grid.r ** -3.0), None, (0.002, 0.075))
        assert fit.gamma_hat == pytest.approx(3.0, abs=1e-8)
        assert fit.fit_residual < 1e-10

    def test_exact_solution(self, ball_grid):
        u = exact_singular_solution(3, 0.2, 1.0)(ball_grid.r, 0.3)
        fit = fit_blowup_exponent(Field(ball_grid, u), None, (0.002, 0.075))
        assert fit.gamma_hat == pytest.approx(2.5, abs=1e-6)

    def test_constant(self, ball_grid):
        assert fit_blowup_exponent(Field(ball_grid, np.ones(ball_grid.size)), None,
                                   (0.002, 0.075)).gamma_hat == pytest.approx(0.0, abs=1e-12)

    def test_empty_window(self, ball_grid):
        with pytest.raises(DiagnosticError):
            fit_blowup_exponent(Field(ball_grid, np.ones(ball_grid.size)), None, (0.5, 0.50001))

    def test_sandwich_on_run(self, gamma3_run):
        p, tr = gamma3_run
        for k, t in enumerate(tr.times):
            if t >= 0.1:
                fit = fit_blowup_exponent(tr.field(k), None, default_window(tr.grid, p.delta1))
                assert abs(fit.gamma_hat - 3.0) <= 0.15


class TestAronsonBenilan:
    def test_constant(self, ball_grid):
        r = check_aronson_benilan(constant_traj(ball_grid), 0.0, 0.2)
        assert r.value == pytest.approx(-1.0) and r.passed

    def test_exact_solution(self, annulus_grid):
        ex = exact_singular_solution(3, 0.2, 1.0)
        ts = np.linspace(0.0, 0.9, 10)
        tr = Trajectory(annulus_grid, ts, np.array([ex(annulus_grid.r, t) for t in ts]))
        assert check_aronson_benilan(tr, 0.0, 0.2).passed

    def test_violation(self, ball_grid):
        ts = np.linspace(0.0, 1.0, 11)
        vals = np.exp(3 * ts / 0.8)[:, None] * np.ones(ball_grid.size)
        assert not check_aronson_benilan(Trajectory(ball_grid, ts, vals), 0.0, 0.2).passed

    def test_no_steps(self, ball_grid):
        with pytest.raises(DiagnosticError):
            check_aronson_benilan(constant_traj(ball_grid), 2.0, 0.2)

    def test_solver_run(self, gamma3_run):
        _, tr = gamma3_run
        assert check_aronson_benilan(tr, 0.0, 0.2).passed


class TestComparison:
    def test_identical(self, gamma3_run):
        _, tr = gamma3_run
        assert np.all(check_comparison(tr, tr) == 0)
        assert np.all(check_L1_contraction(tr, tr) == 0)

    def test_ordered_runs(self, ball_grid):
        times = [0.05, 0.1, 0.2]
        a = run_regularized(single_point(lam=1.0), 1e-3, 1e4, F1, 0.2, CFG, ball_grid, times)
        b = run_regularized(single_point(lam=2.0), 1e-3, 1e4, F1, 0.2, CFG, ball_grid, times)
        assert np.max(check_comparison(a, b)) <= 1e-8
        assert np.max(check_comparison(b, a)) > 1.0
        seq = check_L1_contraction(b, a)
        assert non_increasing(seq).passed
        # ordered data: the positive part is the whole difference
        w = ball_grid.weights
        assert np.allclose(seq, (b.values - a.values) @ w, rtol=1e-12, atol=0)

    def test_shape_mismatch(self, ball_grid, annulus_grid):
        with pytest.raises(ShapeError):
            check_comparison(constant_traj(ball_grid), constant_traj(annulus_grid))

    def test_non_increasing(self):
        assert non_increasing([3, 2, 2, 1]).passed
        assert not non_increasing([1.0, 1.1]).passed
        assert non_increasing([1.0, 1.00001], 1e-4).passed


class TestMonitors:
    def test_target_final(self, gamma3_run):
        p, tr = gamma3_run
        mk = probe_mask(tr.grid, p)
        assert convergence_monitor(tr, tr.field(len(tr) - 1), mk)[-1] == 0.0

    def test_constant_run(self, ball_grid):
        p = ModelParams(3, 0.2, (), 1.0, Ball(1.0), 0.3)
        tr = run_regularized(p, 1e-3, 10.0, F1, 1.0, CFG, ball_grid, [0.5])
        mk = probe_mask(ball_grid, p)
        assert np.allclose(convergence_monitor(tr, 1.0, mk), 1e-3)
        assert np.allclose(blowup_monitor(tr, mk), 1.001)

    def test_exact_decreasing(self, annulus_grid):
        ex = exact_singular_solution(3, 0.2, 1.0)
        ts = np.linspace(0.0, 0.9, 5)
        tr = Trajectory(annulus_grid, ts, np.array([ex(annulus_grid.r, t) for t in ts]))
        seq = blowup_monitor(tr, probe_mask(annulus_grid))
        assert np.all(np.diff(seq) < 0)

    def test_empty_probe(self, ball_grid):
        with pytest.raises(DiagnosticError):
            blowup_monitor(constant_traj(ball_grid), np.zeros(ball_grid.size, bool))
        with pytest.raises(ShapeError):
            blowup_monitor(constant_traj(ball_grid), np.ones(3, bool))

    def test_sequences(self):
        assert strictly_increasing([1, 2, 3]) and not strictly_increasing([1, 1, 2])
        assert eventually_decreasing([1, 5, 4, 3]) and not eventually_decreasing([5, 4, 3, 4])

    def test_converging_run(self, ball_grid):
        p = single_point()
        tr = run_regularized(p, 1e-3, 1e9, F1, 50.0, CFG, ball_grid, [5, 10, 20, 30, 40, 50])
        mk = probe_mask(ball_grid, p)
        seq = convergence_monitor(tr, harmonic_limit(1.0, 0.2, ball_grid), mk)
        assert eventually_decreasing(seq)
        assert seq[-1] <= 0.05
        assert laplacian_probe_residual(tr.field(len(tr) - 1), 0.2, mk) <= 1e-3
        assert empirical_regime(tr, p, mk).regime == CONVERGE_HARMONIC

    def test_blowup_run(self, ball_grid):
        p = single_point(gamma=6.0)
        # M must exceed u0 on the fit window or the truncation plateau hides the source
        tr = run_regularized(p, 1e-3, 1e18, F1, 5.0, CFG, ball_grid, [1, 2, 3, 4, 5])
        mk = probe_mask(ball_grid, p)
        assert strictly_increasing(blowup_monitor(tr, mk))
        assert empirical_regime(tr, p, mk).regime == BLOWUP


class TestScaling:
    def test_gradient_power_law(self, ball_grid):
        g, m = 3.0, 0.2
        # on a non-uniform grid the discrete gradient is only close to gamma r^{-gamma-1}
        val = gradient_scaling_check(Field(ball_grid, ball_grid.r ** -g), None, g, (0.01, 0.075), m)
        r = ball_grid.r[(ball_grid.r >= 0.01) & (ball_grid.r <= 0.075)]
        exact = np.max(g * r ** (g * (1 - m) / 2 - 1))
        assert val == pytest.approx(exact, rel=0.02)

    def test_gradient_constant(self, ball_grid):
        assert gradient_scaling_check(Field(ball_grid, np.ones(ball_grid.size)), None, 3.0,
                                      (0.01, 0.075), 0.2) == pytest.approx(0.0, abs=1e-14)

    def test_gradient_refinement(self):
        p = single_point()
        vals = []
        for N in (100, 200):
            g = make_grid(p.domain, 3, nodes=N)
            tr = run_regularized(p, 1e-3, 1e9, F1, 0.5, CFG, g, [0.5])
            vals.append(gradient_scaling_check(tr.field(len(tr) - 1), None, 3.0, (0.01, 0.075), 0.2))
        assert abs(vals[1] / vals[0] - 1) < 0.2

    def test_time_derivative(self, gamma3_run):
        _, tr = gamma3_run
        assert np.isfinite(time_derivative_scaling_check(tr, None, 3.0, (0.01, 0.075)))


class TestInitialTrace:
    def test_constant(self, ball_grid):
        p = ModelParams(3, 0.2, (), 1.0, Ball(1.0), 0.3)
        tr = run_regularized(p, 1e-3, 10.0, F1, 0.1, CFG, ball_grid, [1e-3])
        r = initial_trace_check(tr, ConstantProfile(1.0), [0.2, 0.5], p)
        assert r.max_abs == pytest.approx(1e-3)

    def test_gamma3(self, gamma3_run):
        p, tr = gamma3_run
        r = initial_trace_check(tr, build_u0(p), [0.5], p)
        assert r.time == 5e-4
        assert r.max_rel <= 0.05

    def test_halving(self, ball_grid):
        p = single_point()
        errs = []
        for ts in (2e-3, 1e-3, 5e-4):
            tr = run_regularized(p, 1e-3, 1e9, F1, ts, CFG, ball_grid, [ts])
            errs.append(initial_trace_check(tr, build_u0(p), [0.5], p).max_abs)
        assert errs[0] >= errs[1] - 1e-10 and errs[1] >= errs[2] - 1e-10

    def test_rejects_singular_ball(self, gamma3_run):
        p, tr = gamma3_run
        with pytest.raises(DiagnosticError):
            initial_trace_check(tr, build_u0(p), [0.1], p)


class TestWeightedMass:
    def test_run(self, gamma3_run):
        _, tr = gamma3_run
        w = WeightPsi(3, 0.2, 0.0, 3.0, 0.3, 0.15)
        from fdblowup.barriers import C_psi
        res = weighted_mass_check(tr, w, C_psi(w))
        assert res.passed and res.margin >= -res.tolerance

    def test_constant_bound(self, ball_grid):
        w = WeightPsi(3, 0.2, 0.0, 3.0, 0.3, 0.15)
        res = weighted_mass_check(constant_traj(ball_grid), w, 0.0)
        # constant mass versus a decaying bound
        assert res.margin == pytest.approx(0.0, abs=1e-14) and res.passed

    def test_singular_weight_on_grid(self):
        g = make_grid(Annulus(0.1, 1.0), 3, nodes=41)
        w = WeightPsi(3, 0.2, 0.4, 3.0, 0.3, 0.15)
        # annulus grid excludes r = 0 so the weight is finite everywhere
        assert weighted_mass_check(constant_traj(g), w, 0.0).passed


class TestTruncation:
    def test_bounds(self, ball_grid):
        assert truncation_bounds(constant_traj(ball_grid, 1.1), 0.1, 1.0).passed
        assert not truncation_bounds(constant_traj(ball_grid, 1.2), 0.1, 1.0).passed
        assert not truncation_bounds(constant_traj(ball_grid, 0.05), 0.1, 1.0).passed

    @settings(max_examples=15)
    @given(st.floats(0.01, 0.5), st.floats(2.0, 1e4), st.floats(2.6, 4.9))
    def test_runs_respect_bounds(self, eps, M, gamma):
        g = make_grid(Ball(1.0), 3, nodes=60)
        p = single_point(gamma=gamma)
        tr = run_regularized(p, eps, M, F1, 0.1, CFG, g, [0.05])
        assert truncation_bounds(tr, eps, max(M, 1.0)).passed
