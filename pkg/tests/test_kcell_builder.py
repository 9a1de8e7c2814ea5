# tests/test_kcell_builder.py
import numpy as np
import pytest

from kcell_lab.models.geometry import Ball, Window, WindowKind, translate, unit_ball
from kcell_lab.models.polytope import CellSource
from kcell_lab.models.samples import MarkSet, RngStream
from kcell_lab.services.functionals import mean_width
from kcell_lab.services.geometry_service import dominates, support_values
from kcell_lab.services.kcell_builder import (
    build_from_marks, build_kcell, build_kcell_family, build_polar_cell, cell_circumradius,
    cell_from_hyperplanes, mark_halfspaces, mark_height_for, polar_cell_from_points,
    window_for_body,
)
from kcell_lab.services.sampler import sample_marks


class TestWindowPolicy:
    def test_unit_bodies_get_radius_four(self, ball2, square):
        assert window_for_body(ball2).radius == pytest.approx(4.0)
        assert window_for_body(square).radius == pytest.approx(4.0)

    def test_scales_with_circumradius(self):
        window = window_for_body(Ball(np.zeros(2), 2.0), WindowKind.BOX)
        assert window.kind is WindowKind.BOX
        assert window.radius == pytest.approx(8.0)

    def test_explicit_factor(self, ball2):
        assert window_for_body(ball2, factor=2.5).radius == pytest.approx(2.5)

    def test_mark_height(self):
        assert mark_height_for(Window.ball(4.0)) == pytest.approx(8.0)


class TestProcessCells:
    def test_cell_contains_body(self, square, quad2, rng):
        cell = build_kcell(square, 20.0, None, rng, quad2)
        assert cell.source is CellSource.HYPERPLANE_PROCESS
        assert cell.vertices is not None
        assert dominates(square, cell, quad2)
        assert mean_width(cell, quad2) >= mean_width(square, quad2) - 1e-12

    def test_deterministic(self, ball2, quad2):
        a = build_kcell(ball2, 20.0, None, RngStream(99, 4), quad2)
        b = build_kcell(ball2, 20.0, None, RngStream(99, 4), quad2)
        np.testing.assert_array_equal(a.vertices, b.vertices)

    def test_translation_equivariant(self, square, quad2):
        v = np.array([2.0, 1.0])
        base = build_kcell(square, 20.0, None, RngStream(3, 1), quad2)
        moved = build_kcell(translate(square, v), 20.0, None, RngStream(3, 1), quad2)
        np.testing.assert_allclose(moved.vertices, base.vertices + v, atol=1e-9)

    def test_family_is_nested(self, ball2, quad2, rng):
        cells = build_kcell_family(ball2, [8.0, 16.0, 32.0], None, rng, quad2)
        U = quad2.nodes
        h = [support_values(cell, U) for cell in cells]
        assert np.all(h[1] <= h[0] + 1e-9)
        assert np.all(h[2] <= h[1] + 1e-9)

    def test_family_top_level_matches_single_cell(self, ball2, quad2):
        family = build_kcell_family(ball2, [8.0, 16.0], None, RngStream(1, 2), quad2)
        single = build_kcell(ball2, 16.0, None, RngStream(1, 2), quad2)
        np.testing.assert_allclose(family[-1].vertices, single.vertices)

    def test_guard_only_cell_is_truncated(self, ball2, quad2):
        cell = cell_from_hyperplanes(np.zeros((0, 2)), np.zeros(0), ball2, Window.ball(3.0), quad=quad2)
        assert cell.truncated
        assert cell_circumradius(cell) == pytest.approx(3.0 * np.sqrt(2.0))

    def test_cell_leaving_the_ball_window_is_truncated(self, ball2, quad2):
        # [-1, 2.5]^2: the corner (2.5, 2.5) lies outside the ball of radius 3 but inside the guard box
        normals = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        offsets = np.array([2.5, 2.5, 1.0, 1.0])
        in_ball = cell_from_hyperplanes(normals, offsets, ball2, Window.ball(3.0), quad=quad2)
        in_box = cell_from_hyperplanes(normals, offsets, ball2, Window.box(3.0), quad=quad2)
        assert in_ball.truncated
        assert not in_box.truncated

    def test_every_escaped_cell_is_flagged(self, ball2, quad2):
        escaped = 0
        for i in range(400):
            cell = build_kcell(ball2, 2.0, Window.ball(2.0), RngStream(7, i), quad2)
            if cell_circumradius(cell) > 2.0 + 1e-9:
                escaped += 1
                assert cell.truncated, i
        assert escaped > 0

    def test_three_dimensional_cell(self, quad3_small, rng):
        ball = unit_ball(3)
        cell = build_kcell(ball, 5.0, None, rng, quad3_small)
        assert cell.vertices is None
        assert cell.cached_supports(quad3_small.key) is not None
        assert mean_width(cell, quad3_small) >= 2.0 - 1e-9
        assert cell_circumradius(cell, quad3_small) >= 1.0


class TestMarkCells:
    def test_mark_halfspaces_offsets(self, square):
        eta = MarkSet.from_pairs([([1.0, 0.0], 0.25), ([0.0, -1.0], 1.0)], t_max=2.0)
        normals, offsets = mark_halfspaces(eta, square)
        np.testing.assert_allclose(normals, [[1.0, 0.0], [0.0, -1.0]])
        np.testing.assert_allclose(offsets, [0.75, 1.5])

    def test_axis_marks_at_height_zero_give_the_square(self, square, quad2):
        eta = MarkSet.from_pairs([([1.0, 0.0], 0.0), ([-1.0, 0.0], 0.0),
                                  ([0.0, 1.0], 0.0), ([0.0, -1.0], 0.0)], t_max=1.0)
        cell = build_from_marks(eta, square, quad=quad2)
        assert not cell.truncated
        corners = np.array([[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]])
        np.testing.assert_allclose(np.array(sorted(map(tuple, cell.vertices))), corners, atol=1e-12)
        assert mean_width(cell, quad2) == pytest.approx(4.0 / np.pi, abs=1e-9)

    def test_cell_beyond_the_mark_height_is_truncated(self, square, quad2):
        pairs = [([1.0, 0.0], 0.0), ([-1.0, 0.0], 0.0), ([0.0, 1.0], 0.0), ([0.0, -1.0], 0.9)]
        # vertex (0.5, -1.4) has norm ~1.487; marks reach t_max + 0.5
        assert not build_from_marks(MarkSet.from_pairs(pairs, 1.0), square, quad=quad2).truncated
        assert build_from_marks(MarkSet.from_pairs(pairs, 0.95), square, quad=quad2).truncated

    def test_empty_mark_set(self, ball2):
        normals, offsets = mark_halfspaces(MarkSet(np.zeros((0, 2)), np.zeros(0), 1.0), ball2)
        assert normals.shape == (0, 2)
        assert offsets.size == 0

    def test_translation_equivariant(self, square, quad2, rng):
        window = Window.ball(8.0)
        eta = sample_marks(20.0, mark_height_for(window), rng)
        v = np.array([0.5, -0.25])
        base = build_from_marks(eta, square, window, quad2)
        moved = build_from_marks(eta, translate(square, v), window, quad2)
        assert not base.truncated
        assert base.source is CellSource.MARK_COUPLING
        np.testing.assert_allclose(support_values(moved, quad2.nodes),
                                   support_values(base, quad2.nodes) + quad2.nodes @ v, atol=1e-9)

    def test_monotone_in_body(self, ball2, square, quad2, rng):
        window = Window.ball(4.0)
        eta = sample_marks(16.0, mark_height_for(window), rng)
        small = build_from_marks(eta, square, window, quad2)
        large = build_from_marks(eta, ball2, window, quad2)
        assert dominates(small, large, quad2)


class TestPolarCells:
    def test_polar_cell_contains_unit_ball(self, quad2, rng):
        cell = build_polar_cell(20.0, 0.25, rng, 2, quad2)
        assert cell.source is CellSource.POLAR_POINTS
        assert np.all(support_values(cell, quad2.nodes) >= 1.0 - 1e-12)

    def test_unguarded_polar_region(self):
        cell = polar_cell_from_points([[0.5, 0.0], [0.0, 0.5], [-0.5, 0.0], [0.0, -0.5]], None)
        assert cell.vertices is None
        assert not cell.truncated
        assert support_values(cell, np.array([[1.0, 0.0]]))[0] == pytest.approx(2.0)
