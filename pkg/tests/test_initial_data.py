import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdblowup.core import BoundaryProfile, Box, ModelParams, SingularPoint, make_grid
from fdblowup.errors import DiscretizationError, ParameterError
from fdblowup.initial_data import (ConstantProfile, build_u0, lift, lift_boundary, regularize,
                                   sample_to_grid, truncate)

from conftest import single_point


def power(gamma):
    return lambda r: np.asarray(r, dtype=float) ** (-gamma)


class TestBuild:
    def test_inside_gluing_radius(self, params3):
        assert build_u0(params3)(np.array([0.1]))[0] == pytest.approx(1000.0)

    def test_outside_gluing_radius(self, params3):
        assert build_u0(params3)(np.array([0.5]))[0] == 1.0

    def test_midpoint_between_two_points(self):
        p = ModelParams(3, 0.2, (SingularPoint((0.3, 0, 0), 1, 3), SingularPoint((-0.3, 0, 0), 1, 3)),
                        1.0, Box(1.0), 0.19)
        # delta0 = 0.2 here and delta1 must stay strictly below it
        assert build_u0(p)(np.array([[0.0, 0.0, 0.0]]))[0] == 1.0

    def test_lower_and_upper_bounds(self, params3, rng):
        u0 = build_u0(params3)
        r = rng.uniform(1e-4, 0.3 - 1e-9, 2000)
        v = u0(r)
        assert np.all(v >= 1.0)
        assert np.all(v * r ** 3 >= 1.0 - 1e-12)
        lam_up = params3.upper_lambda(params3.points[0])
        assert np.all(v <= lam_up * r ** -3 * (1 + 1e-12))

    def test_accepts_points_in_radial_mode(self, params3):
        u0 = build_u0(params3)
        assert u0(np.array([[0.1, 0.0, 0.0]]))[0] == pytest.approx(1000.0)


class TestTruncateLift:
    def test_truncation_active(self):
        assert truncate(power(2.5), 10)(0.3) == 10

    def test_truncation_inactive(self):
        assert truncate(power(2.5), 10)(0.7) == pytest.approx(0.7 ** -2.5)

    def test_truncation_monotone_in_M(self, rng):
        r = rng.uniform(1e-3, 1, 500)
        assert np.all(truncate(power(2.5), 5)(r) <= truncate(power(2.5), 50)(r))

    def test_bad_M(self):
        with pytest.raises(ParameterError):
            truncate(power(2.5), 0)

    def test_lift_constant(self):
        assert lift(ConstantProfile(0.0), 0.25)(np.zeros(4)).tolist() == [0.25] * 4

    def test_lift_boundary(self):
        f = lift_boundary(BoundaryProfile.constant(1.0), 0.1)
        assert f(3.0) == pytest.approx(1.1)
        assert f.inf() == pytest.approx(1.1)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
    def test_bad_eps(self, eps):
        with pytest.raises(ParameterError):
            lift(ConstantProfile(1.0), eps)

    def test_truncate_then_lift(self):
        r = 0.1
        regular = regularize(power(2.5), 10, 0.5)(r)
        other_order = truncate(lift(power(2.5), 0.5), 10)(r)
        assert regular == pytest.approx(10.5)
        assert regular - other_order == pytest.approx(0.5)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(1, 1e6), st.floats(1, 1e6))
    def test_ordering_chain(self, e1, e2, M1, M2):
        e1, e2 = sorted((e1, e2))
        M1, M2 = sorted((M1, M2))
        r = np.random.default_rng(0).uniform(1e-3, 1, 1000)
        u0 = build_u0(single_point())
        lo = regularize(u0, M1, e1)(r)
        hi = regularize(u0, M2, e2)(r)
        assert np.all(lo <= hi)
        assert np.all(lo >= e1)


class TestSample:
    def test_constant(self, ball_grid):
        f = sample_to_grid(ConstantProfile(1.0), ball_grid)
        assert np.all(f.values == 1.0)

    def test_regularized_max(self, params3, ball_grid):
        f = sample_to_grid(regularize(build_u0(params3), 10.0, 0.1), ball_grid)
        assert f.values.max() == pytest.approx(10.1)

    def test_untruncated_matches_closed_form(self, params3):
        for rmin in (1e-2, 1e-3, 1e-4):
            g = make_grid(params3.domain, 3, nodes=80, r_min=rmin)
            f = sample_to_grid(build_u0(params3), g)
            assert f.values[0] == pytest.approx(rmin ** -3)

    def test_infinite_value_rejected(self):
        p = ModelParams(3, 0.2, (SingularPoint((0, 0, 0), 1, 3),), 1.0, Box(1.0), 0.2)
        g = make_grid(p.domain, 3, nodes=9)
        with pytest.raises(DiscretizationError):
            sample_to_grid(build_u0(p), g)
        assert np.isfinite(sample_to_grid(regularize(build_u0(p), 50, 0.1), g).values).all()
