# tests/test_support_engine.py
import numpy as np
import pytest

from kcell_lab.core.exceptions import InfeasibleError, UnboundedError
from kcell_lab.models.geometry import Window, cube
from kcell_lab.models.polytope import HRep, SupportResult, UNBOUNDED
from kcell_lab.models.samples import RngStream
from kcell_lab.services.geometry_service import polygon_perimeter
from kcell_lab.services.sampler import pullback_delta, sample_kappa0_points
from kcell_lab.services.support_engine import (
    DenseSimplex, SupportEngine, hrep_circumradius, merge_parallel, polar_hrep, polar_support,
    polygon_from_halfspaces_2d, polygon_with_guard_flags, support_hrep,
)

AXES_2D = np.vstack([np.eye(2), -np.eye(2)])
AXES_3D = np.vstack([np.eye(3), -np.eye(3)])


def random_polygon_rep(gen, boxguard=None):
    """Bounded 2-D HRep: jittered angles keep every gap between normals below pi"""
    m = int(gen.integers(5, 30))
    angles = 2.0 * np.pi * (np.arange(m) + gen.uniform(0.0, 0.9, m)) / m
    normals = np.column_stack([np.cos(angles), np.sin(angles)])
    return HRep.build(normals, gen.uniform(0.5, 2.0, m), np.zeros(2), boxguard)


def vertex_supports(vertices, U):
    return (U @ vertices.T).max(axis=1)


@pytest.fixture
def square_rep():
    # [-1, 1]^2
    return HRep.build(AXES_2D, np.ones(4), np.zeros(2))


class TestDenseSimplex:
    def test_small_program(self):
        lp = DenseSimplex(np.array([[1.0, 1.0]]), np.array([1.0, 2.0]))
        status, lam, _ = lp.solve(np.array([1.0]))
        assert status == "optimal"
        np.testing.assert_allclose(lam, [1.0, 0.0])

    def test_infeasible(self):
        lp = DenseSimplex(np.array([[1.0, 1.0]]), np.array([1.0, 1.0]))
        status, lam, _ = lp.solve(np.array([-1.0]))
        assert status == "infeasible"
        assert lam is None

    def test_warm_start_gives_same_optimum(self):
        A = AXES_2D.T
        lp = DenseSimplex(A, np.ones(4))
        _, lam_cold, basis = lp.solve(np.array([0.6, 0.8]))
        _, lam_warm, _ = lp.solve(np.array([0.8, 0.6]), warm_basis=basis)
        assert float(np.ones(4) @ lam_cold) == pytest.approx(1.4)
        assert float(np.ones(4) @ lam_warm) == pytest.approx(1.4)


class TestSupportHRep:
    def test_square_supports(self, square_rep):
        assert support_hrep(square_rep, [1.0, 0.0]).value == pytest.approx(1.0)
        diagonal = np.array([1.0, 1.0]) / np.sqrt(2.0)
        res = support_hrep(square_rep, diagonal)
        assert isinstance(res, SupportResult)
        assert res.value == pytest.approx(np.sqrt(2.0))
        np.testing.assert_allclose(res.argmax, [1.0, 1.0], atol=1e-12)

    def test_half_plane_is_unbounded_off_its_normal(self):
        rep = HRep.build([[1.0, 0.0]], [1.0], np.zeros(2))
        assert support_hrep(rep, [1.0, 0.0]).value == pytest.approx(1.0)
        assert support_hrep(rep, [0.0, 1.0]) is UNBOUNDED

    def test_empty_constraint_set_is_unbounded(self):
        rep = HRep.build(np.zeros((0, 2)), np.zeros(0), np.zeros(2))
        assert SupportEngine(rep).support([1.0, 0.0]) is UNBOUNDED

    def test_interior_point_must_be_strict(self):
        with pytest.raises(InfeasibleError):
            HRep.build([[1.0, 0.0]], [0.0], np.zeros(2))

    def test_guard_activity_is_reported(self):
        rep = HRep.build([[1.0, 0.0]], [0.5], np.zeros(2), boxguard=Window.box(3.0))
        engine = SupportEngine(rep)
        assert engine.support([-1.0, 0.0]).active_guard
        assert engine.support([-1.0, 0.0]).value == pytest.approx(3.0)
        # a process facet parallel to a guard facet replaces it
        assert engine.guard.sum() == 3

    def test_cube_matches_vertex_form(self, random_dirs):
        rep = HRep.build(AXES_3D, np.full(6, 0.5), np.zeros(3))
        U = random_dirs(40, 3, seed=3)
        values, active, unbounded, _ = SupportEngine(rep).support_many(U)
        expected = (U @ cube(3).vertices.T).max(axis=1)
        np.testing.assert_allclose(values, expected, atol=1e-10)
        assert not active.any()
        assert not unbounded.any()

    def test_translated_rep_shifts_supports(self, square_rep):
        moved = square_rep.translated([2.0, 0.0])
        assert support_hrep(moved, [1.0, 0.0]).value == pytest.approx(3.0)
        assert moved.contains([2.5, 0.5])


class TestMergeParallel:
    def test_keeps_tightest_offset(self):
        normals = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        offsets = np.array([2.0, 1.0, 3.0])
        n, o, g = merge_parallel(normals, offsets, np.zeros(3, dtype=bool))
        assert n.shape == (2, 2)
        assert sorted(o.tolist()) == [1.0, 3.0]
        assert not g.any()

    def test_distinct_normals_survive(self):
        n, o, _ = merge_parallel(AXES_2D, np.ones(4), np.zeros(4, dtype=bool))
        assert o.size == 4

    def test_nearly_equal_normals_merge_across_rounding_boundaries(self):
        # the two second coordinates round to different 10-decimal values
        normals = np.array([[1.0, 4.9999e-11], [1.0, 5.0001e-11], [0.0, 1.0]])
        guard = np.array([False, True, False])
        n, o, g = merge_parallel(normals, np.array([1.0, 0.5, 2.0]), guard)
        assert o.tolist() == [0.5, 2.0]
        assert g.tolist() == [True, False]

    def test_chains_of_close_normals_form_one_group(self):
        angles = np.array([0.0, 0.8e-9, 1.6e-9, 0.5])
        normals = np.column_stack([np.cos(angles), np.sin(angles)])
        n, o, _ = merge_parallel(normals, np.array([3.0, 2.0, 4.0, 1.0]), np.zeros(4, dtype=bool))
        assert o.tolist() == [2.0, 1.0]

    def test_angle_above_tolerance_is_kept(self):
        normals = np.array([[1.0, 0.0], [np.cos(1e-6), np.sin(1e-6)]])
        _, o, _ = merge_parallel(normals, np.array([1.0, 2.0]), np.zeros(2, dtype=bool))
        assert o.size == 2

    def test_process_facet_wins_a_tie_with_the_guard(self):
        normals = np.array([[1.0, 0.0], [1.0, 0.0]])
        _, o, g = merge_parallel(normals, np.array([3.0, 3.0]), np.array([False, True]))
        assert o.tolist() == [3.0]
        assert not g.any()


class TestPolygons:
    def test_square_perimeter(self, square_rep):
        vertices = polygon_from_halfspaces_2d(square_rep)
        assert vertices.shape == (4, 2)
        assert polygon_perimeter(vertices) == pytest.approx(8.0)

    def test_redundant_constraints_dropped(self):
        normals = np.vstack([AXES_2D, np.array([[1.0, 1.0]]) / np.sqrt(2.0)])
        rep = HRep.build(normals, np.append(np.ones(4), 5.0), np.zeros(2))
        assert polygon_from_halfspaces_2d(rep).shape == (4, 2)

    def test_unbounded_polygon_raises(self):
        rep = HRep.build([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], np.ones(3), np.zeros(2))
        with pytest.raises(UnboundedError):
            polygon_from_halfspaces_2d(rep)

    def test_guard_flag_when_box_is_an_edge(self):
        rep = HRep.build([[1.0, 0.0]], [1.0], np.zeros(2), boxguard=Window.box(4.0))
        vertices, touched = polygon_with_guard_flags(rep)
        assert touched
        assert vertices.shape[0] == 4

    def test_guard_flag_clear_when_box_is_redundant(self):
        rep = HRep.build(AXES_2D, np.ones(4), np.zeros(2), boxguard=Window.box(4.0))
        _, touched = polygon_with_guard_flags(rep)
        assert not touched


class TestRadiiAndPolars:
    def test_cube_circumradius(self, quad3_small):
        rep = HRep.build(AXES_3D, np.full(6, 0.5), np.zeros(3))
        assert hrep_circumradius(rep, quad3_small.nodes) == pytest.approx(np.sqrt(3.0) / 2.0, rel=1e-9)

    def test_square_circumradius(self, square_rep):
        assert hrep_circumradius(square_rep, np.eye(2)) == pytest.approx(np.sqrt(2.0))

    def test_polar_of_diamond_is_square(self):
        diamond = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
        assert polar_support(diamond, [1.0, 0.0]).value == pytest.approx(1.0)
        diagonal = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert polar_support(diamond, diagonal).value == pytest.approx(np.sqrt(2.0))


class TestRandomizedAgreement:
    def check_lp_against_vertices(self, reps, random_dirs):
        gen = np.random.default_rng(2024)
        U = random_dirs(100, 2, seed=5)
        for i in range(reps):
            rep = random_polygon_rep(gen)
            values, active, unbounded, _ = SupportEngine(rep).support_many(U)
            assert not unbounded.any(), i
            assert not active.any(), i
            np.testing.assert_allclose(values, vertex_supports(polygon_from_halfspaces_2d(rep), U),
                                       rtol=0.0, atol=1e-9, err_msg=f"polytope {i}")

    def test_lp_matches_polygon_vertices(self, random_dirs):
        self.check_lp_against_vertices(100, random_dirs)

    @pytest.mark.slow
    def test_lp_matches_polygon_vertices_thousand_polytopes(self, random_dirs):
        self.check_lp_against_vertices(1000, random_dirs)

    def test_polar_of_polar_reproduces_hull(self, random_dirs):
        gen = np.random.default_rng(77)
        U = random_dirs(100, 2, seed=8)
        diamond = 0.2 * AXES_2D
        for i in range(50):
            points = random_dirs(12, 2, seed=100 + i) * gen.uniform(0.5, 1.5, 12)[:, None]
            points = np.vstack([points, diamond])
            polar_vertices = polygon_from_halfspaces_2d(polar_hrep(points))
            values, _, unbounded, _ = SupportEngine(polar_hrep(polar_vertices)).support_many(U)
            assert not unbounded.any(), i
            np.testing.assert_allclose(values, vertex_supports(points, U), rtol=0.0, atol=1e-8,
                                       err_msg=f"point set {i}")

    def test_kappa0_points_match_their_hyperplanes(self, random_dirs):
        points = sample_kappa0_points(60.0, 0.5, RngStream(2024, 0), 2)
        assert len(points) >= 50
        points = points[:50]
        normals, offsets = [], []
        for x in points:
            u, tau = pullback_delta(x).halfspace_towards(np.zeros(2))
            normals.append(u)
            offsets.append(tau)
        rep = HRep.build(normals, offsets, np.zeros(2))
        polygon = polygon_from_halfspaces_2d(rep)
        for u in random_dirs(100, 2, seed=13):
            lhs, rhs = polar_support(points, u), support_hrep(rep, u)
            assert lhs is not UNBOUNDED
            assert lhs.value == pytest.approx(rhs.value, abs=1e-9)
            assert lhs.value == pytest.approx(float(np.max(polygon @ u)), abs=1e-9)


class TestGuardCorrectness:
    def test_redundant_guard_changes_nothing(self, random_dirs):
        gen = np.random.default_rng(31)
        U = random_dirs(100, 2, seed=2)
        for i in range(100):
            seed = int(gen.integers(1 << 30))
            bare = random_polygon_rep(np.random.default_rng(seed))
            guarded = random_polygon_rep(np.random.default_rng(seed), Window.box(10.0))
            vertices, touched = polygon_with_guard_flags(guarded)
            assert not touched, i
            np.testing.assert_allclose(vertex_supports(vertices, U),
                                       vertex_supports(polygon_from_halfspaces_2d(bare), U), atol=1e-12)
            values, active, _, _ = SupportEngine(guarded).support_many(U)
            assert not active.any(), i
            np.testing.assert_allclose(values, vertex_supports(vertices, U), atol=1e-9)

    def test_guard_caps_unbounded_regions(self, random_dirs):
        gen = np.random.default_rng(32)
        U = random_dirs(100, 2, seed=3)
        for i in range(100):
            m = int(gen.integers(2, 12))
            # normals confined to an open half circle leave the region unbounded
            angles = gen.uniform(0.05, 0.95 * np.pi, m)
            normals = np.column_stack([np.cos(angles), np.sin(angles)])
            offsets = gen.uniform(0.5, 2.0, m)
            rep = HRep.build(normals, offsets, np.zeros(2), Window.box(6.0))
            vertices, touched = polygon_with_guard_flags(rep)
            assert touched, i
            assert np.abs(vertices).max() == pytest.approx(6.0, abs=1e-9)
            engine = SupportEngine(rep)
            values, active, unbounded, argmax = engine.support_many(U)
            assert not unbounded.any(), i
            np.testing.assert_allclose(values, vertex_supports(vertices, U), atol=1e-9)
            on_guard = np.abs(argmax).max(axis=1) >= 6.0 - 1e-9
            np.testing.assert_array_equal(active, on_guard)
            # straight down is blocked by the guard alone
            assert engine.support([0.0, -1.0]).active_guard
