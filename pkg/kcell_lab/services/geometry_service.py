# kcell_lab/services/geometry_service.py
"""
Support functions, circumradius and Hausdorff distance for every body variant
and for K-cells.
"""

from typing import Optional, Tuple, Union

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import UnboundedError, ValidationError
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.geometry import (
    Ball, ConvexBody, Direction, HPolytope, SupportCombo, VPolytope, translate,
)
from kcell_lab.models.polytope import HRep, KCell, UNBOUNDED
from kcell_lab.models.quadrature import SphericalQuadrature
from kcell_lab.services.support_engine import (
    SupportEngine, hrep_circumradius, polygon_from_halfspaces_2d,
)

logger = LoggerManager.get_logger(__name__)

Supported = Union[ConvexBody, KCell, HRep]


def _coords(u) -> np.ndarray:
    return u.coords if isinstance(u, Direction) else np.asarray(u, dtype=float)


def hrep_of(body: HPolytope) -> HRep:
    return HRep.build(body.normals, body.offsets, body.interior)


def support(body: ConvexBody, u) -> float:
    """h(body, u) for Ball, VPolytope and SupportCombo (HPolytope goes through the engine)"""
    return float(support_values(body, _coords(u)[None, :])[0])


def support_values(obj: Supported, U: np.ndarray) -> np.ndarray:
    """h(obj, u_i) for every row of U; raises UnboundedError for unbounded polytopes"""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if isinstance(obj, Ball):
        return U @ obj.center + obj.radius
    if isinstance(obj, VPolytope):
        return (U @ obj.vertices.T).max(axis=1)
    if isinstance(obj, SupportCombo):
        total = np.zeros(U.shape[0])
        for w, body in obj.terms:
            if w > 0:
                total += w * support_values(body, U)
        return total
    if isinstance(obj, KCell):
        if obj.vertices is not None:
            return (U @ obj.vertices.T).max(axis=1)
        return support_values(obj.hrep, U)
    if isinstance(obj, HPolytope):
        obj = hrep_of(obj)
    if isinstance(obj, HRep):
        if obj.dim == 2:
            try:
                vertices = polygon_from_halfspaces_2d(obj)
                return (U @ vertices.T).max(axis=1)
            except UnboundedError:
                pass
        values, _, unbounded, _ = SupportEngine(obj).support_many(U)
        if np.any(unbounded):
            raise UnboundedError(U[int(np.argmax(unbounded))])
        return values
    raise ValidationError(f"Unsupported body type {type(obj).__name__}", field="body")


def support_point(obj: Supported, u) -> np.ndarray:
    """A point of obj attaining h(obj, u)"""
    u = _coords(u)
    if isinstance(obj, Ball):
        return obj.center + obj.radius * u / np.linalg.norm(u)
    if isinstance(obj, VPolytope):
        return np.array(obj.vertices[int(np.argmax(obj.vertices @ u))])
    if isinstance(obj, SupportCombo):
        return sum(w * support_point(body, u) for w, body in obj.terms)
    if isinstance(obj, KCell):
        if obj.vertices is not None:
            return np.array(obj.vertices[int(np.argmax(obj.vertices @ u))])
        obj = obj.hrep
    if isinstance(obj, HPolytope):
        obj = hrep_of(obj)
    res = SupportEngine(obj).support(u)
    if res is UNBOUNDED:
        raise UnboundedError(u)
    return np.asarray(res.argmax)


def circumradius_origin(obj: Supported, quad: Optional[SphericalQuadrature] = None) -> float:
    """R_o: max ||x|| over the body"""
    if isinstance(obj, Ball):
        return float(np.linalg.norm(obj.center) + obj.radius)
    if isinstance(obj, VPolytope):
        return float(np.linalg.norm(obj.vertices, axis=1).max())
    if isinstance(obj, KCell) and obj.vertices is not None:
        return float(np.linalg.norm(obj.vertices, axis=1).max())
    if quad is None:
        from kcell_lab.services.quadrature import default_quadrature
        quad = default_quadrature(obj.dim)
    if isinstance(obj, (HPolytope, HRep, KCell)):
        rep = obj.hrep if isinstance(obj, KCell) else (hrep_of(obj) if isinstance(obj, HPolytope) else obj)
        return hrep_circumradius(rep, quad.nodes)
    # max_u h(K,u) = max ||x||; refine the best node by x -> x/||x|| ascent
    values = support_values(obj, quad.nodes)
    best = float(values.max())
    u = quad.nodes[int(np.argmax(values))]
    for _ in range(50):
        x = support_point(obj, u)
        norm = float(np.linalg.norm(x))
        if norm <= 0.0:
            break
        u = x / norm
        value = float(support_values(obj, u[None, :])[0])
        if value <= best + 1e-13:
            best = max(best, value)
            break
        best = value
    return best


def interior_point(obj: Supported) -> np.ndarray:
    """A point in the interior (center, vertex mean, stored interior point)"""
    if isinstance(obj, Ball):
        return np.array(obj.center)
    if isinstance(obj, VPolytope):
        return obj.vertices.mean(axis=0)
    if isinstance(obj, HPolytope):
        return np.array(obj.interior)
    if isinstance(obj, SupportCombo):
        return sum(w * interior_point(body) for w, body in obj.terms)
    if isinstance(obj, KCell):
        return np.array(obj.hrep.interior)
    if isinstance(obj, HRep):
        return np.array(obj.interior)
    raise ValidationError(f"Unsupported body type {type(obj).__name__}", field="body")


def chebyshev_center(body: HPolytope) -> Tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed ball (LP via scipy.optimize.linprog)"""
    d = body.dim
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A = np.hstack([body.normals, np.ones((body.normals.shape[0], 1))])
    res = linprog(c, A_ub=A, b_ub=body.offsets, bounds=[(None, None)] * d + [(0, None)],
                  method="highs")
    if res.status == 3:
        raise UnboundedError()
    if not res.success:
        return np.array(body.interior), 0.0
    return res.x[:d], float(res.x[-1])


def body_center(body: ConvexBody) -> np.ndarray:
    """Chebyshev center for H-polytopes, center or vertex mean otherwise"""
    if isinstance(body, HPolytope):
        return chebyshev_center(body)[0]
    if isinstance(body, SupportCombo):
        return sum(w * body_center(b) for w, b in body.terms)
    return interior_point(body)


def center_body(body: ConvexBody) -> Tuple[ConvexBody, np.ndarray]:
    """Translate body so its center sits at o; returns (centered body, applied shift)"""
    shift = -np.asarray(body_center(body), dtype=float)
    if np.allclose(shift, 0.0, atol=0.0):
        return body, np.zeros_like(shift)
    return translate(body, shift), shift


def inradius_origin(body: Supported, quad: SphericalQuadrature) -> float:
    """Largest r with r*B^d inside the body: min_u h(body, u) (approximated on the nodes)"""
    return float(support_values(body, quad.nodes).min())


def vertex_cycle_2d(obj: Supported) -> Optional[np.ndarray]:
    """Counterclockwise vertex cycle of a planar polygon, None for smooth bodies"""
    if obj.dim != 2:
        return None
    if isinstance(obj, VPolytope):
        try:
            hull = ConvexHull(obj.vertices)
            return np.array(obj.vertices[hull.vertices])
        except QhullError:
            # segment (degenerate polygon): its two extreme points
            spread = obj.vertices - obj.vertices.mean(axis=0)
            _, _, vt = np.linalg.svd(spread)
            proj = spread @ vt[0]
            return np.array(obj.vertices[[int(np.argmin(proj)), int(np.argmax(proj))]])
    if isinstance(obj, KCell):
        if obj.vertices is not None:
            return obj.vertices
        return polygon_from_halfspaces_2d(obj.hrep)
    if isinstance(obj, HPolytope):
        return polygon_from_halfspaces_2d(hrep_of(obj))
    if isinstance(obj, HRep):
        return polygon_from_halfspaces_2d(obj)
    return None


def polygon_perimeter(vertices: np.ndarray) -> float:
    if vertices.shape[0] == 2:
        return 2.0 * float(np.linalg.norm(vertices[1] - vertices[0]))
    edges = np.roll(vertices, -1, axis=0) - vertices
    return float(np.linalg.norm(edges, axis=1).sum())


def _anchors_2d(obj: Supported) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """(points whose differences give interior critical directions, arc breakpoints)"""
    if isinstance(obj, Ball):
        return obj.center[None, :], np.zeros((0, 2))
    cycle = vertex_cycle_2d(obj)
    if cycle is None:
        return None, np.zeros((0, 2))
    edges = np.roll(cycle, -1, axis=0) - cycle
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    norms = np.linalg.norm(normals, axis=1)
    normals = normals[norms > 0] / norms[norms > 0, None]
    return cycle, normals


def hausdorff_directions_2d(K: Supported, L: Supported) -> np.ndarray:
    """Directions at which max_u |h_K - h_L| is attained for planar polygons and discs"""
    pk, nk = _anchors_2d(K)
    pl, nl = _anchors_2d(L)
    dirs = [nk, nl, -nk, -nl]
    if pk is not None and pl is not None:
        diff = (pk[:, None, :] - pl[None, :, :]).reshape(-1, 2)
        norms = np.linalg.norm(diff, axis=1)
        diff = diff[norms > 1e-15] / norms[norms > 1e-15, None]
        dirs.extend([diff, -diff])
    return np.vstack(dirs) if dirs else np.zeros((0, 2))


def hausdorff_distance(K: Supported, L: Supported, quad: SphericalQuadrature) -> float:
    """max_u |h(K,u) - h(L,u)|; exact for planar polygons and discs"""
    U = quad.nodes
    if K.dim == 2:
        extra = hausdorff_directions_2d(K, L)
        if extra.size:
            U = np.vstack([U, extra])
    return float(np.abs(support_values(K, U) - support_values(L, U)).max())


def dominates(inner: Supported, outer: Supported, quad: SphericalQuadrature,
              tol: Optional[float] = None) -> bool:
    """Support-level containment test inner ⊆ outer on the quadrature nodes"""
    tol = tol if tol is not None else get_settings().GEOMETRY_TOL
    return bool(np.all(support_values(inner, quad.nodes) <= support_values(outer, quad.nodes) + tol))
