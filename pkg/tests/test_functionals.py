# tests/test_functionals.py
import numpy as np
import pytest

from kcell_lab.core.exceptions import HitsBody, NotNested, ValidationError
from kcell_lab.models.geometry import Ball, Hyperplane, Window, unit_ball
from kcell_lab.models.samples import RngStream
from kcell_lab.services.functionals import (
    WidthGainField, certify_kt, hull_mean_width, kappa0_measure, kt_boundary, kt_support,
    kt_width_gain, lambda0_deficit, lower_bound_estimate, mean_width, min_gain_on_hyperplane,
    pushforward_mass_mc, separating_measure, separating_measure_mc, width_gain,
)
from kcell_lab.services.quadrature import uniform_angles_2d

# (2/pi)(sqrt(3) - pi/3): gain of the unit disc at distance 2
DISC_GAIN_AT_2 = (2.0 / np.pi) * (np.sqrt(3.0) - np.pi / 3.0)


def disc_gain(D: float) -> float:
    return (2.0 / np.pi) * (np.sqrt(D * D - 1.0) - np.arccos(1.0 / D))


class TestSeparatingMeasure:
    def test_concentric_balls(self, ball2, quad2):
        assert separating_measure(ball2, Ball(np.zeros(2), 2.0), quad2) == pytest.approx(2.0)

    def test_square_in_ball(self, ball2, square, quad2):
        assert separating_measure(square, ball2, quad2) == pytest.approx(2.0 - 4.0 / np.pi, abs=1e-9)

    def test_not_nested(self, ball2, square, quad2):
        with pytest.raises(NotNested):
            separating_measure(ball2, square, quad2)

    def test_monte_carlo_agrees(self, ball2, quad2):
        mean, se = separating_measure_mc(ball2, Ball(np.zeros(2), 2.0), Window.ball(3.0), 20.0, 300,
                                         RngStream(17, 0), quad2)
        assert abs(mean - 2.0) <= 4.0 * se


class TestKappaZero:
    def test_annulus_mass(self):
        assert kappa0_measure(0.5) == pytest.approx(2.0)
        assert kappa0_measure(0.25, 0.5, d=3) == pytest.approx(4.0)

    def test_bad_radii(self):
        with pytest.raises(ValidationError):
            kappa0_measure(0.5, 0.25)

    def test_pushforward_mass(self):
        mean, se = pushforward_mass_mc(0.5, 1.0, 20.0, 300, RngStream(21, 0))
        assert abs(mean - 2.0) <= 4.0 * se

    def test_lambda0_deficit(self):
        assert lambda0_deficit(np.zeros((2, 2)), 2) == pytest.approx(1.0)
        square = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        # lambda_0(B^2) = 1, the inscribed square covers 2/pi of the disc
        assert lambda0_deficit(square, 2) == pytest.approx(1.0 - 2.0 / np.pi)


class TestWidthGain:
    def test_disc_closed_form(self, ball2, quad2):
        assert width_gain(ball2, [2.0, 0.0], quad2) == pytest.approx(DISC_GAIN_AT_2, abs=1e-12)
        assert DISC_GAIN_AT_2 == pytest.approx(0.43599, abs=1e-5)

    def test_zero_inside_body(self, ball2, square, quad2):
        assert width_gain(ball2, [0.3, -0.2], quad2) == 0.0
        assert width_gain(square, [0.1, 0.2], quad2) == pytest.approx(0.0, abs=1e-12)

    def test_square_corner_extension(self, square, quad2):
        # hull of the square and (1, 0): two sides of length sqrt(0.5) replace one of length 1
        expected = (np.sqrt(2.0) - 1.0) / np.pi
        assert width_gain(square, [1.0, 0.0], quad2) == pytest.approx(expected, abs=1e-12)

    def test_quadrature_matches_closed_form(self, ball2):
        approx = width_gain(ball2, [2.0, 0.0], uniform_angles_2d(8192))
        assert approx == pytest.approx(DISC_GAIN_AT_2, abs=1e-4)

    def test_field_is_convex_along_a_segment(self, square, quad2):
        field = WidthGainField(square, quad2)
        a, b = np.array([1.0, -0.5]), np.array([-0.3, 1.4])
        mid = field(0.5 * (a + b))
        assert mid <= 0.5 * (field(a) + field(b)) + 1e-12


class TestMinGain:
    def test_disc(self, ball2, quad2):
        m, x = min_gain_on_hyperplane(ball2, Hyperplane.of([1.0, 0.0], 2.0), quad2)
        assert m == pytest.approx(DISC_GAIN_AT_2, abs=1e-9)
        np.testing.assert_allclose(x, [2.0, 0.0], atol=1e-5)

    def test_square(self, square, quad2):
        m, x = min_gain_on_hyperplane(square, Hyperplane.of([1.0, 0.0], 1.0), quad2)
        assert m == pytest.approx((np.sqrt(2.0) - 1.0) / np.pi, abs=1e-5)
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-5)

    def test_orientation_does_not_matter(self, ball2, quad2):
        m, _ = min_gain_on_hyperplane(ball2, Hyperplane.of([-1.0, 0.0], -2.0), quad2)
        assert m == pytest.approx(DISC_GAIN_AT_2, abs=1e-9)

    def test_hyperplane_through_body(self, ball2, quad2):
        with pytest.raises(HitsBody):
            min_gain_on_hyperplane(ball2, Hyperplane.of([1.0, 0.0], 0.5), quad2)


class TestLevelSets:
    def test_disc_level_set_is_a_disc(self, ball2, quad2):
        t = disc_gain(1.5)
        boundary = kt_boundary(ball2, t, quad2, rays=256)
        np.testing.assert_allclose(np.linalg.norm(boundary, axis=1), 1.5, atol=1e-8)

    def test_disc_kt_width_gain(self, ball2, quad2):
        # K[t] is the disc of radius D with gain(D) = t, so the gain in width is 2(D - 1)
        t = disc_gain(1.25)
        assert kt_width_gain(ball2, t, quad2) == pytest.approx(0.5, rel=1e-4)

    def test_kt_support_of_disc(self, ball2, quad2):
        t = disc_gain(1.5)
        assert kt_support(ball2, t, [0.6, 0.8], quad2) == pytest.approx(1.5, abs=1e-7)

    def test_kt_needs_positive_t(self, ball2, quad2):
        with pytest.raises(ValidationError):
            kt_width_gain(ball2, 0.0, quad2)

    def test_lower_bound_estimate(self, ball2, quad2):
        value = lower_bound_estimate(ball2, 16.0, quad2)
        assert value == pytest.approx(np.exp(-1.0) * kt_width_gain(ball2, 1.0 / 16.0, quad2))
        assert value > lower_bound_estimate(ball2, 64.0, quad2) > 0.0

    def test_hull_mean_width_of_square_points(self, quad2):
        points = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5], [0.0, 0.0]])
        assert hull_mean_width(points, quad2) == pytest.approx(4.0 / np.pi)

    def test_ball_width_in_three_dimensions(self):
        assert mean_width(unit_ball(3)) == 2.0

    @pytest.mark.slow
    def test_certified_against_hull_oracle(self, square, quad2):
        value, oracle, ok = certify_kt(square, 1.0 / 16.0, quad2, rng=RngStream(5, 0))
        assert ok, (value, oracle)
