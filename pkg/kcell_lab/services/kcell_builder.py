# kcell_lab/services/kcell_builder.py
"""
K-cell construction: from the hyperplane process, from a mark set, and from
kappa_0 points (polar construction for K = B^d).
"""

from typing import List, Optional, Sequence

import numpy as np

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import ValidationError
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.geometry import ConvexBody, Window, WindowKind, unit_ball
from kcell_lab.models.polytope import CellSource, HRep, KCell
from kcell_lab.models.quadrature import SphericalQuadrature
from kcell_lab.models.samples import MarkSet, RngStream
from kcell_lab.services.geometry_service import (
    center_body, circumradius_origin, inradius_origin, interior_point, support_values,
)
from kcell_lab.services.quadrature import default_quadrature
from kcell_lab.services.sampler import sample_hyperplanes, sample_kappa0_points, thin_sample
from kcell_lab.services.support_engine import SupportEngine, polygon_with_guard_flags

logger = LoggerManager.get_logger(__name__)


def window_for_body(K: ConvexBody, kind: WindowKind = WindowKind.BALL,
                    factor: Optional[float] = None,
                    quad: Optional[SphericalQuadrature] = None) -> Window:
    """Fixed window policy R = factor * max(1, R_o(K)) with factor = WINDOW_FACTOR (4)"""
    factor = factor if factor is not None else get_settings().WINDOW_FACTOR
    radius = factor * max(1.0, circumradius_origin(K, quad))
    return Window(kind, radius)


def mark_height_for(window: Window) -> float:
    """t_max = MARK_HEIGHT_FACTOR * R"""
    return get_settings().MARK_HEIGHT_FACTOR * window.radius


def _ascent_radius(engine: SupportEngine, nodes: np.ndarray, values: np.ndarray) -> float:
    """max ||x|| from the best support node, then u <- x/||x|| until the norm stops growing"""
    u = nodes[int(np.argmax(values))]
    best = float(values.max())
    for _ in range(50):
        x = np.asarray(engine.support(u).argmax)
        norm = float(np.linalg.norm(x))
        if norm <= best + 1e-12:
            break
        best, u = norm, x / norm
    return best


def _finish_cell(rep: HRep, source: CellSource, body_ref: Optional[ConvexBody],
                 quad: Optional[SphericalQuadrature],
                 shift: Optional[np.ndarray] = None,
                 reach: Optional[float] = None) -> KCell:
    """Polygon or support cache plus truncation flag; undo the centering shift last.

    ``reach`` is the radius of the ball on which the sample is complete. A cell
    leaving it could have been cut by an unsampled hyperplane, so it is flagged
    as truncated even when no guard facet is active.
    """
    vertices = None
    cache = None
    engine = None
    if rep.dim == 2:
        vertices, truncated = polygon_with_guard_flags(rep)
    else:
        quad = quad or default_quadrature(rep.dim)
        engine = SupportEngine(rep)
        values, active, unbounded, _ = engine.support_many(quad.nodes)
        # the guard bounds the region, so no direction can be unbounded here
        truncated = bool(np.any(active) or np.any(unbounded))
        cache = (quad.key, values)
    if not truncated and reach is not None:
        if vertices is not None:
            radius = float(np.linalg.norm(vertices, axis=1).max())
        else:
            radius = _ascent_radius(engine, quad.nodes, cache[1])
        if radius > reach + get_settings().GEOMETRY_TOL:
            logger.debug(f"Cell leaves the sampled ball of radius {reach:g} (R_o = {radius:.4f})")
            truncated = True
    if shift is not None and np.any(shift != 0.0):
        back = -np.asarray(shift, dtype=float)
        rep = rep.translated(back)
        if vertices is not None:
            vertices = vertices + back
        if cache is not None:
            cache = (cache[0], cache[1] + quad.nodes @ back)
    return KCell(rep, truncated, source, body_ref, vertices, cache)


def cell_circumradius(cell: KCell, quad: Optional[SphericalQuadrature] = None) -> float:
    """R_o(Z): vertex norms in the plane; in higher d the best cached node, then x -> x/||x|| ascent"""
    if cell.vertices is not None:
        return float(np.linalg.norm(cell.vertices, axis=1).max())
    quad = quad or default_quadrature(cell.dim)
    cached = cell.cached_supports(quad.key)
    if cached is None:
        return circumradius_origin(cell, quad)
    return _ascent_radius(SupportEngine(cell.hrep), quad.nodes, cached)


def sampled_reach(window: Window) -> Optional[float]:
    """Radius of the ball on which a process sample restricted to the window is complete.

    Box windows coincide with the guard box, so a cell can never leave them.
    """
    return window.radius if window.kind is WindowKind.BALL else None


def cell_from_hyperplanes(normals: np.ndarray, offsets: np.ndarray, K: ConvexBody,
                          window: Window, source: CellSource = CellSource.HYPERPLANE_PROCESS,
                          quad: Optional[SphericalQuadrature] = None,
                          shift: Optional[np.ndarray] = None,
                          body_ref: Optional[ConvexBody] = None) -> KCell:
    """Intersect halfspaces <x,u_i> <= tau_i (each containing K) with the box guard"""
    guard = Window.box(window.radius)
    rep = HRep.build(normals, offsets, interior_point(K), boxguard=guard)
    return _finish_cell(rep, source, body_ref if body_ref is not None else K, quad, shift,
                        reach=sampled_reach(window))


def build_kcell(K: ConvexBody, n: float, window: Optional[Window], rng: RngStream,
                quad: Optional[SphericalQuadrature] = None) -> KCell:
    """Z_K for the isotropic process of intensity n, guarded by the window's box"""
    centered, shift = center_body(K)
    window = window or window_for_body(centered, quad=quad)
    sample = sample_hyperplanes(centered, window, n, rng, quad)
    return cell_from_hyperplanes(sample.normals, sample.offsets, centered, window,
                                 CellSource.HYPERPLANE_PROCESS, quad, shift, body_ref=K)


def build_kcell_family(K: ConvexBody, n_grid: Sequence[float], window: Optional[Window],
                       rng: RngStream, quad: Optional[SphericalQuadrature] = None,
                       body_width: Optional[float] = None) -> List[KCell]:
    """Cells at every n of the grid from one sample at n_max, coupled by thinning"""
    n_grid = [float(n) for n in n_grid]
    if not n_grid:
        raise ValidationError("empty intensity grid", field="n_grid")
    n_max = max(n_grid)
    centered, shift = center_body(K)
    window = window or window_for_body(centered, quad=quad)
    master = sample_hyperplanes(centered, window, n_max, rng, quad, body_width=body_width)
    cells = []
    for n in n_grid:
        thinned = master if n == n_max else thin_sample(master, n / n_max)
        cells.append(cell_from_hyperplanes(thinned.normals, thinned.offsets, centered, window,
                                           CellSource.HYPERPLANE_PROCESS, quad, shift, body_ref=K))
    return cells


def mark_halfspaces(eta: MarkSet, K: ConvexBody):
    """(normals, offsets) of H^-(u, h(K,u) + t) for every mark"""
    if eta.count == 0:
        return np.zeros((0, K.dim)), np.zeros(0)
    if eta.directions.shape[1] != K.dim:
        raise ValidationError("mark directions and body differ in dimension", field="directions")
    return eta.directions, support_values(K, eta.directions) + eta.heights


def build_from_marks(eta: MarkSet, K: ConvexBody, window: Optional[Window] = None,
                     quad: Optional[SphericalQuadrature] = None) -> KCell:
    """P(eta, K) with the box guard of the window policy.

    Marks stop at t_max, so a missing mark can only cut points x with
    <x,u> > h(K,u) + t_max, which needs ||x|| > t_max + min_u h(K,u).
    """
    window = window or window_for_body(K, quad=quad)
    normals, offsets = mark_halfspaces(eta, K)
    rep = HRep.build(normals, offsets, interior_point(K), boxguard=Window.box(window.radius))
    quad = quad or default_quadrature(K.dim)
    reach = eta.t_max + inradius_origin(K, quad)
    return _finish_cell(rep, CellSource.MARK_COUPLING, K, quad, reach=reach)


def polar_cell_from_points(points: np.ndarray, guard_radius: Optional[float],
                           quad: Optional[SphericalQuadrature] = None) -> KCell:
    """{y : <y, x_i> <= 1}; guard_radius None leaves the region unguarded (HRep only)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = points.shape[1]
    norms = np.linalg.norm(points, axis=1)
    keep = norms > 0
    normals = points[keep] / norms[keep, None]
    offsets = 1.0 / norms[keep]
    guard = Window.box(guard_radius) if guard_radius is not None else None
    rep = HRep.build(normals, offsets, np.zeros(d), boxguard=guard)
    if guard is None:
        return KCell(rep, False, CellSource.POLAR_POINTS, unit_ball(d))
    # points inside B_r cannot cut the ball of radius 1/r
    return _finish_cell(rep, CellSource.POLAR_POINTS, unit_ball(d), quad, reach=guard_radius)


def build_polar_cell(n: float, r: float, rng: RngStream, d: int = 2,
                     quad: Optional[SphericalQuadrature] = None) -> KCell:
    """Polar of the hull of kappa_0 points: same law as Z_{B^d} restricted to the window 1/r"""
    points = sample_kappa0_points(n, r, rng, d)
    return polar_cell_from_points(points, 1.0 / r, quad)
