# kcell_lab/services/functionals.py
"""
Mean width and the functionals built on it.

Convention: W(L) = 2 * integral of h(L,u) over the normalized spherical
measure, so W(B^d) = 2 and W equals perimeter/pi in the plane.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import ConvexHull, QhullError

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import HitsBody, NotNested, ValidationError
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.geometry import Ball, ConvexBody, Hyperplane, SupportCombo, Window
from kcell_lab.models.polytope import KCell
from kcell_lab.models.quadrature import SphericalQuadrature
from kcell_lab.models.samples import RngStream
from kcell_lab.services.geometry_service import (
    Supported, circumradius_origin, interior_point, polygon_perimeter,
    support_values, vertex_cycle_2d,
)
from kcell_lab.services.quadrature import default_quadrature

logger = LoggerManager.get_logger(__name__)


# ----------------------------------------------------------------------------
# Mean width
# ----------------------------------------------------------------------------

def mean_width(obj: Supported, quad: Optional[SphericalQuadrature] = None) -> float:
    """W(obj) = 2 * sum_i w_i h(obj, u_i); closed forms where the scheme is exact"""
    quad = quad or default_quadrature(obj.dim)
    if isinstance(obj, Ball):
        return 2.0 * obj.radius
    if isinstance(obj, SupportCombo):
        return float(sum(w * mean_width(body, quad) for w, body in obj.terms))
    if quad.exact and obj.dim == 2:
        cycle = vertex_cycle_2d(obj)
        if cycle is not None:
            return polygon_perimeter(cycle) / np.pi
    if isinstance(obj, KCell):
        cached = obj.cached_supports(quad.key)
        if cached is not None:
            return 2.0 * quad.integrate(cached)
    return 2.0 * quad.integrate(support_values(obj, quad.nodes))


def hull_mean_width(points: np.ndarray, quad: Optional[SphericalQuadrature] = None) -> float:
    """W(conv(points)); perimeter/pi in the plane"""
    points = np.atleast_2d(points)
    d = points.shape[1]
    quad = quad or default_quadrature(d)
    try:
        hull = ConvexHull(points)
        extreme = points[hull.vertices]
    except QhullError:
        extreme = points
    if d == 2 and quad.exact and extreme.shape[0] >= 3:
        return polygon_perimeter(extreme) / np.pi
    return 2.0 * quad.integrate((quad.nodes @ extreme.T).max(axis=1))


# ----------------------------------------------------------------------------
# Separating measure
# ----------------------------------------------------------------------------

def separating_measure(K: ConvexBody, L: ConvexBody,
                       quad: Optional[SphericalQuadrature] = None) -> float:
    """mu{H : H meets L, H misses K} = W(L) - W(K) for K inside L"""
    quad = quad or default_quadrature(K.dim)
    excess = support_values(K, quad.nodes) - support_values(L, quad.nodes)
    worst = float(excess.max())
    if worst > get_settings().GEOMETRY_TOL:
        raise NotNested(worst)
    return mean_width(L, quad) - mean_width(K, quad)


def separating_measure_mc(K: ConvexBody, L: ConvexBody, window: Window, n: float,
                          reps: int, rng: RngStream,
                          quad: Optional[SphericalQuadrature] = None) -> Tuple[float, float]:
    """Monte Carlo estimate (mean, stderr) of W(L) - W(K): count of window hyperplanes
    missing K and hitting L, divided by n"""
    from kcell_lab.services.sampler import sample_hyperplanes

    quad = quad or default_quadrature(K.dim)
    width_k = mean_width(K, quad)
    values = np.empty(reps)
    for i in range(reps):
        sample = sample_hyperplanes(K, window, n, rng.child(i), quad, body_width=width_k)
        if sample.count:
            hits = np.count_nonzero(sample.offsets <= support_values(L, sample.normals))
        else:
            hits = 0
        values[i] = hits / n
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(reps))


def kappa0_measure(r_inner: float, r_outer: float = 1.0, d: int = 2) -> float:
    """kappa_0 of the annulus r_inner <= ||x|| <= r_outer: 2 (1/r_inner - 1/r_outer), any d"""
    if not 0.0 < r_inner < r_outer <= 1.0:
        raise ValidationError("need 0 < r_inner < r_outer <= 1", field="r_inner")
    return 2.0 * (1.0 / r_inner - 1.0 / r_outer)


def pushforward_mass_mc(r_inner: float, r_outer: float, n: float, reps: int, rng: RngStream,
                        d: int = 2) -> Tuple[float, float]:
    """Delta-images of process hyperplanes missing B^d that land in the annulus, per unit n"""
    from kcell_lab.models.geometry import unit_ball
    from kcell_lab.services.sampler import pushforward_delta_many, sample_hyperplanes

    ball = unit_ball(d)
    window = Window.ball(1.0 / r_inner)
    values = np.empty(reps)
    for i in range(reps):
        sample = sample_hyperplanes(ball, window, n, rng.child(i), body_width=2.0)
        if sample.count:
            # offsets equal to 1 are measure-zero events on the sphere
            keep = sample.offsets > 1.0
            points = pushforward_delta_many(sample.normals[keep], sample.offsets[keep])
            radii = np.linalg.norm(points, axis=1)
            values[i] = np.count_nonzero((radii >= r_inner) & (radii <= r_outer)) / n
        else:
            values[i] = 0.0
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(reps))


def lambda0_deficit(points: np.ndarray, d: int) -> float:
    """lambda_0(B^d minus conv(points)), lambda_0 = (2/omega_d) Lebesgue; points inside B^d"""
    from kcell_lab.services.sampler import unit_ball_volume

    full = 2.0 / d  # lambda_0(B^d) = (2/omega_d) kappa_d with omega_d = d kappa_d
    points = np.atleast_2d(points)
    if points.shape[0] < d + 1:
        return full
    try:
        volume = ConvexHull(points).volume
    except QhullError:
        return full
    return full * (1.0 - volume / unit_ball_volume(d))


# ----------------------------------------------------------------------------
# Width gain, m(H), K[t]
# ----------------------------------------------------------------------------

class WidthGainField:
    """gain(x) = W(conv(K ∪ {x})) - W(K), convex in x and zero on K"""

    CHUNK = 4096

    def __init__(self, K: ConvexBody, quad: Optional[SphericalQuadrature] = None):
        self.K = K
        self.quad = quad or default_quadrature(K.dim)
        self.h = support_values(K, self.quad.nodes)
        self.exact_disc = isinstance(K, Ball) and K.dim == 2 and self.quad.exact

    def __call__(self, x) -> float:
        return float(self.many(np.asarray(x, dtype=float)[None, :])[0])

    def many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.exact_disc:
            return self._disc_gain(X)
        out = np.empty(X.shape[0])
        nodes, weights, h = self.quad.nodes, self.quad.weights, self.h
        for start in range(0, X.shape[0], self.CHUNK):
            block = X[start:start + self.CHUNK]
            excess = block @ nodes.T - h
            np.maximum(excess, 0.0, out=excess)
            out[start:start + self.CHUNK] = 2.0 * (excess @ weights)
        return out

    def _disc_gain(self, X: np.ndarray) -> np.ndarray:
        # two tangent segments replace an arc: (2/pi) (sqrt(D^2 - r^2) - r arccos(r/D))
        r = self.K.radius
        D = np.linalg.norm(X - self.K.center, axis=1)
        out = np.zeros(X.shape[0])
        outside = D > r
        Do = D[outside]
        out[outside] = (2.0 / np.pi) * (np.sqrt(Do ** 2 - r ** 2) - r * np.arccos(r / Do))
        return out

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        active = (self.quad.nodes @ x - self.h) > 0
        return 2.0 * (self.quad.weights[active] @ self.quad.nodes[active])


def width_gain(K: ConvexBody, x, quad: Optional[SphericalQuadrature] = None) -> float:
    """W(K^x) - W(K) >= 0, with K^x = conv(K ∪ {x})"""
    quad = quad or default_quadrature(K.dim)
    x = np.asarray(x, dtype=float)
    if quad.exact and K.dim == 2 and not isinstance(K, SupportCombo):
        if isinstance(K, Ball):
            return WidthGainField(K, quad)(x)
        cycle = vertex_cycle_2d(K)
        if cycle is not None:
            return max(0.0, hull_mean_width(np.vstack([cycle, x]), quad) - polygon_perimeter(cycle) / np.pi)
    h = support_values(K, quad.nodes)
    return 2.0 * quad.integrate(np.maximum(0.0, quad.nodes @ x - h))


def _hyperplane_frame(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis (d x (d-1)) of u-perp"""
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(u.size)]))
    return q[:, 1:u.size]


def min_gain_on_hyperplane(K: ConvexBody, H: Hyperplane,
                           quad: Optional[SphericalQuadrature] = None,
                           rng: Optional[RngStream] = None) -> Tuple[float, np.ndarray]:
    """m(H) = min of the width gain over x in H, and the minimizer of smallest norm"""
    quad = quad or default_quadrature(K.dim)
    u, tau = H.normal.coords, H.offset
    h_plus = float(support_values(K, u[None, :])[0])
    h_minus = float(support_values(K, -u[None, :])[0])
    if -h_minus <= tau <= h_plus:
        raise HitsBody(min(tau - (-h_minus), h_plus - tau))
    if tau < -h_minus:
        u, tau = -u, -tau

    field = WidthGainField(K, quad)
    frame = _hyperplane_frame(u)
    base = tau * u

    def point(z):
        return base + frame @ np.atleast_1d(z)

    def value(z):
        return field(point(z))

    center = interior_point(K)
    z_center = frame.T @ (center - base)
    span = 2.0 * (circumradius_origin(K, quad) + abs(tau) + float(np.linalg.norm(center)))

    if K.dim == 2:
        zc = float(z_center[0])
        res = minimize_scalar(value, bounds=(zc - span, zc + span), method="bounded",
                              options={"xatol": 1e-10})
        best_z, best = float(res.x), float(res.fun)
        # flat bottom: pick the point of smallest norm in {value <= best + tol}
        lo_end = _level_end(value, best_z, zc - span, best + 1e-9)
        hi_end = _level_end(value, best_z, zc + span, best + 1e-9)
        z = float(np.clip(0.0, min(lo_end, hi_end), max(lo_end, hi_end)))
        if value(z) <= best + 1e-9:
            best_z = z
        return float(min(best, value(best_z))), point(best_z)

    settings = get_settings()
    gen = (rng or RngStream(0, 0)).generator()
    starts = [z_center] + [z_center + gen.uniform(-span / 2, span / 2, size=z_center.size)
                           for _ in range(settings.MIN_GAIN_STARTS - 1)]
    candidates = []
    for z0 in starts:
        z = np.array(z0, dtype=float)
        best_z, best = z.copy(), value(z)
        step0 = span / 4.0
        for k in range(200):
            g = frame.T @ field.subgradient(point(z))
            gn = float(np.linalg.norm(g))
            if gn == 0.0:
                break
            z = z - (step0 / np.sqrt(k + 1.0)) * g / gn
            v = value(z)
            if v < best:
                best, best_z = v, z.copy()
        polished = minimize(value, best_z, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": 4000})
        if polished.fun < best:
            best, best_z = float(polished.fun), np.asarray(polished.x)
        candidates.append((best, best_z))
    m = min(c[0] for c in candidates)
    ties = [z for v, z in candidates if v <= m + 1e-9]
    chosen = min(ties, key=lambda z: float(np.linalg.norm(point(z))))
    return float(m), point(chosen)


def _level_end(f, inside: float, outside: float, level: float, steps: int = 80) -> float:
    """Last point from ``inside`` towards ``outside`` with f <= level (f convex)"""
    if f(outside) <= level:
        return outside
    a, b = inside, outside
    for _ in range(steps):
        mid = 0.5 * (a + b)
        if f(mid) <= level:
            a = mid
        else:
            b = mid
    return a


def _ray_boundary(field: WidthGainField, origin: np.ndarray, dirs: np.ndarray, t: float,
                  scale: float, steps: int) -> np.ndarray:
    """Boundary of {gain <= t} along rays origin + s * dir, vectorized bisection"""
    m = dirs.shape[0]
    lo = np.zeros(m)
    hi = np.full(m, scale)
    for _ in range(64):
        inside = field.many(origin + hi[:, None] * dirs) <= t
        if not inside.any():
            break
        lo[inside] = hi[inside]
        hi[inside] *= 2.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        ok = field.many(origin + mid[:, None] * dirs) <= t
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return origin + lo[:, None] * dirs


def _ray_directions(d: int, count: int) -> np.ndarray:
    if d == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    from kcell_lab.services.quadrature import qmc_sphere, spherical_design_3d
    return (spherical_design_3d(count) if d == 3 else qmc_sphere(d, count)).nodes


def kt_boundary(K: ConvexBody, t: float, quad: Optional[SphericalQuadrature] = None,
                rays: Optional[int] = None, field: Optional[WidthGainField] = None) -> np.ndarray:
    """Boundary points of K[t] along a fixed fan of rays from an interior point of K"""
    settings = get_settings()
    quad = quad or default_quadrature(K.dim)
    field = field or WidthGainField(K, quad)
    rays = rays or (settings.KT_RAYS_2D if K.dim == 2 else settings.KT_RAYS_QMC)
    origin = interior_point(K)
    scale = 0.25 * max(1.0, circumradius_origin(K, quad))
    return _ray_boundary(field, origin, _ray_directions(K.dim, rays), t, scale,
                         settings.KT_BISECTION_STEPS)


def kt_width_gain(K: ConvexBody, t: float, quad: Optional[SphericalQuadrature] = None,
                  rays: Optional[int] = None) -> float:
    """W(K[t]) - W(K), K[t] = {x : gain(x) <= t}; both widths from the same ray fan"""
    if not t > 0:
        raise ValidationError("t must be positive", field="t")
    quad = quad or default_quadrature(K.dim)
    field = WidthGainField(K, quad)
    outer = hull_mean_width(kt_boundary(K, t, quad, rays, field), quad)
    inner = hull_mean_width(kt_boundary(K, 0.0, quad, rays, field), quad)
    return max(0.0, outer - inner)


def kt_support(K: ConvexBody, t: float, u, quad: Optional[SphericalQuadrature] = None,
               field: Optional[WidthGainField] = None) -> float:
    """h(K[t], u): ray bracketing along u, then local improvement over ray directions"""
    quad = quad or default_quadrature(K.dim)
    field = field or WidthGainField(K, quad)
    settings = get_settings()
    u = np.asarray(getattr(u, "coords", u), dtype=float)
    origin = interior_point(K)
    scale = 0.25 * max(1.0, circumradius_origin(K, quad))

    def reach(direction: np.ndarray) -> float:
        direction = direction / np.linalg.norm(direction)
        p = _ray_boundary(field, origin, direction[None, :], t, scale, settings.KT_BISECTION_STEPS)[0]
        return float(p @ u)

    best = reach(u)
    if K.dim == 2:
        theta_u = float(np.arctan2(u[1], u[0]))
        res = minimize_scalar(lambda a: -reach(np.array([np.cos(a), np.sin(a)])),
                              bounds=(theta_u - np.pi / 2 + 1e-9, theta_u + np.pi / 2 - 1e-9),
                              method="bounded", options={"xatol": 1e-10})
        return max(best, float(-res.fun))
    frame = _hyperplane_frame(u)
    res = minimize(lambda z: -reach(u + frame @ z), np.zeros(K.dim - 1), method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-12, "initial_simplex":
                            np.vstack([np.zeros(K.dim - 1), 0.2 * np.eye(K.dim - 1)])})
    return max(best, float(-res.fun))


def kt_hull_oracle(K: ConvexBody, t: float, quad: Optional[SphericalQuadrature] = None,
                   points: int = 1_000_000, rng: Optional[RngStream] = None,
                   margin: float = 1.1) -> float:
    """Brute-force W(K[t]) - W(K): uniform points in a box around K[t], keep gain <= t, hull"""
    quad = quad or default_quadrature(K.dim)
    field = WidthGainField(K, quad)
    d = K.dim
    eye = np.eye(d)
    upper = np.array([kt_support(K, t, e, quad, field) for e in eye])
    lower = -np.array([kt_support(K, t, -e, quad, field) for e in eye])
    mid = 0.5 * (upper + lower)
    half = 0.5 * (upper - lower) * margin
    gen = (rng or RngStream(0, 0)).generator()
    kept = []
    chunk = 50_000
    for start in range(0, points, chunk):
        size = min(chunk, points - start)
        X = mid + (2.0 * gen.random((size, d)) - 1.0) * half
        X = X[field.many(X) <= t]
        if X.shape[0]:
            try:
                X = X[ConvexHull(X).vertices] if X.shape[0] > d + 1 else X
            except QhullError:
                pass
            kept.append(X)
    if not kept:
        return 0.0
    cloud = np.vstack(kept)
    return max(0.0, hull_mean_width(cloud, quad) - mean_width(K, quad))


def certify_kt(K: ConvexBody, t: float, quad: Optional[SphericalQuadrature] = None,
               tolerance: float = 0.01, points: int = 1_000_000,
               rng: Optional[RngStream] = None) -> Tuple[float, float, bool]:
    """(ray value, oracle value, agreement within the relative tolerance)"""
    value = kt_width_gain(K, t, quad)
    oracle = kt_hull_oracle(K, t, quad, points, rng)
    scale = max(value, oracle)
    ok = scale == 0.0 or abs(value - oracle) <= tolerance * scale
    return value, oracle, bool(ok)


def lower_bound_estimate(K: ConvexBody, n: float, quad: Optional[SphericalQuadrature] = None) -> float:
    """e^{-1} [W(K[1/n]) - W(K)]"""
    if not n > 0:
        raise ValidationError("intensity must be positive", field="n")
    return float(np.exp(-1.0) * kt_width_gain(K, 1.0 / n, quad))
