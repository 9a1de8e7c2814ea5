# tests/test_sampler.py
import numpy as np
import pytest

from kcell_lab.core.exceptions import HitsUnitBall, ValidationError, WindowTooSmall
from kcell_lab.models.geometry import Hyperplane, Window
from kcell_lab.models.samples import MarkSet, RngStream
from kcell_lab.services.geometry_service import support_values
from kcell_lab.services.sampler import (
    poisson_count_gof, pullback_delta, pushforward_delta, pushforward_delta_many,
    sample_hyperplanes, sample_kappa0_points, sample_lambda0_points, sample_marks,
    thin_sample, uniform_directions, unit_ball_volume,
)


class TestRngStream:
    def test_same_pair_same_draws(self):
        a = RngStream(7, 3).generator().random(5)
        b = RngStream(7, 3).generator().random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_and_children_differ(self):
        base = RngStream(7, 3)
        draws = [s.generator().random() for s in (base, RngStream(7, 4), base.child(0), base.child(1))]
        assert len(set(draws)) == 4

    def test_rejects_negative_seed(self):
        with pytest.raises(ValidationError) as exc:
            RngStream(-1, 0)
        assert exc.value.field == "master_seed"

    def test_directions_are_unit(self):
        U = uniform_directions(RngStream(1, 1).generator(), 100, 3)
        np.testing.assert_allclose(np.linalg.norm(U, axis=1), 1.0)


class TestHyperplaneSampling:
    def test_hyperplanes_miss_body_and_meet_window(self, square, quad2, rng):
        window = Window.ball(4.0)
        sample = sample_hyperplanes(square, window, 20.0, rng, quad2)
        assert sample.count > 0
        assert np.all(sample.offsets >= support_values(square, sample.normals) - 1e-12)
        assert np.all(sample.offsets <= window.support_values(sample.normals) + 1e-12)
        assert np.all((sample.labels >= 0.0) & (sample.labels < 1.0))

    def test_reproducible(self, ball2, quad2):
        a = sample_hyperplanes(ball2, Window.ball(4.0), 10.0, RngStream(5, 9), quad2)
        b = sample_hyperplanes(ball2, Window.ball(4.0), 10.0, RngStream(5, 9), quad2)
        np.testing.assert_array_equal(a.offsets, b.offsets)
        np.testing.assert_array_equal(a.normals, b.normals)

    def test_mean_count(self, ball2, quad2):
        # n (W(window) - W(B)) = 10 * (8 - 2)
        window = Window.ball(4.0)
        counts = [sample_hyperplanes(ball2, window, 10.0, RngStream(11, i), quad2).count
                  for i in range(400)]
        assert np.mean(counts) == pytest.approx(60.0, abs=3.0 * np.sqrt(60.0 / 400))

    def test_window_must_contain_body(self, ball2, quad2, rng):
        with pytest.raises(WindowTooSmall):
            sample_hyperplanes(ball2, Window.ball(0.5), 10.0, rng, quad2)

    def test_rejects_non_positive_intensity(self, ball2, quad2, rng):
        with pytest.raises(ValidationError) as exc:
            sample_hyperplanes(ball2, Window.ball(4.0), 0.0, rng, quad2)
        assert exc.value.field == "n"

    def test_thinning_keeps_low_labels(self, ball2, quad2, rng):
        sample = sample_hyperplanes(ball2, Window.ball(4.0), 40.0, rng, quad2)
        thinned = thin_sample(sample, 0.25)
        assert thinned.intensity == pytest.approx(10.0)
        assert np.all(thinned.labels < 0.25)
        assert thinned.count == int(np.count_nonzero(sample.labels < 0.25))
        assert set(thinned.offsets.tolist()) <= set(sample.offsets.tolist())

    def test_thinning_probability_range(self, ball2, quad2, rng):
        sample = sample_hyperplanes(ball2, Window.ball(4.0), 4.0, rng, quad2)
        with pytest.raises(ValidationError):
            thin_sample(sample, 0.0)


class TestPointProcesses:
    def test_kappa0_points_in_annulus(self, rng):
        points = sample_kappa0_points(50.0, 0.25, rng)
        radii = np.linalg.norm(points, axis=1)
        assert points.shape[0] > 0
        assert np.all((radii >= 0.25 - 1e-12) & (radii <= 1.0 + 1e-12))

    def test_kappa0_mean_count(self):
        # n * 2 (1/r - 1) = 5 * 2 * 3
        counts = [sample_kappa0_points(5.0, 0.25, RngStream(3, i)).shape[0] for i in range(400)]
        assert np.mean(counts) == pytest.approx(30.0, abs=3.0 * np.sqrt(30.0 / 400))

    def test_kappa0_radius_range(self, rng):
        with pytest.raises(ValidationError):
            sample_kappa0_points(5.0, 1.0, rng)

    def test_marks(self, rng):
        eta = sample_marks(10.0, 3.0, rng)
        assert isinstance(eta, MarkSet)
        assert eta.t_max == 3.0
        assert np.all((eta.heights >= 0.0) & (eta.heights <= 3.0))
        counts = [sample_marks(10.0, 3.0, RngStream(4, i)).count for i in range(300)]
        assert np.mean(counts) == pytest.approx(60.0, abs=3.0 * np.sqrt(60.0 / 300))

    def test_mark_set_rejects_heights_above_cap(self):
        with pytest.raises(ValidationError):
            MarkSet.from_pairs([([1.0, 0.0], 2.0)], t_max=1.0)

    def test_lambda0_mass(self):
        # total mass of n lambda_0 on B^d is 2n/d
        counts = [sample_lambda0_points(30.0, 3, RngStream(8, i)).shape[0] for i in range(400)]
        assert np.mean(counts) == pytest.approx(20.0, abs=3.0 * np.sqrt(20.0 / 400))

    def test_lambda0_points_in_ball(self, rng):
        points = sample_lambda0_points(100.0, 2, rng)
        assert np.all(np.linalg.norm(points, axis=1) <= 1.0)

    def test_ball_volumes(self):
        assert unit_ball_volume(2) == pytest.approx(np.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * np.pi / 3.0)


class TestDelta:
    def test_pushforward(self):
        np.testing.assert_allclose(pushforward_delta(Hyperplane.of([1.0, 0.0], 2.0)), [0.5, 0.0])
        # orientation is fixed by the origin side
        np.testing.assert_allclose(pushforward_delta(Hyperplane.of([1.0, 0.0], -2.0)), [-0.5, 0.0])

    def test_pullback_inverts_pushforward(self):
        H = pullback_delta([0.0, 0.25])
        assert H.same_as(Hyperplane.of([0.0, 1.0], 4.0))
        np.testing.assert_allclose(pushforward_delta(H), [0.0, 0.25])

    def test_hits_unit_ball(self):
        with pytest.raises(HitsUnitBall):
            pushforward_delta(Hyperplane.of([1.0, 0.0], 0.5))
        with pytest.raises(HitsUnitBall):
            pullback_delta([1.2, 0.0])
        with pytest.raises(HitsUnitBall):
            pushforward_delta_many(np.array([[1.0, 0.0]]), np.array([1.0]))

    def test_origin_has_no_preimage(self):
        with pytest.raises(ValidationError):
            pullback_delta([0.0, 0.0])


class TestCountGof:
    def test_accepts_poisson_counts(self):
        counts = np.random.default_rng(0).poisson(20.0, size=2000)
        _, p_value = poisson_count_gof(counts, 20.0)
        assert p_value > 0.001

    def test_rejects_wrong_mean(self):
        counts = np.random.default_rng(0).poisson(26.0, size=2000)
        _, p_value = poisson_count_gof(counts, 20.0)
        assert p_value < 1e-6
