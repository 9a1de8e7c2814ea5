# kcell_lab/services/quadrature.py
"""
Node sets for the normalized spherical measure. Every scheme is antipodally
symmetric, so linear functions integrate to zero up to rounding.
"""

from functools import lru_cache

import numpy as np
from scipy.stats import norm, qmc

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import ValidationError
from kcell_lab.models.quadrature import QuadratureScheme, SphericalQuadrature


def _even(n: int, name: str) -> int:
    n = int(n)
    if n < 2:
        raise ValidationError("quadrature needs at least 2 nodes", field=name)
    return n + (n % 2)


def _angles(n: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(theta), np.sin(theta)])


def uniform_angles_2d(n: int) -> SphericalQuadrature:
    n = _even(n, "n")
    return SphericalQuadrature(_angles(n), np.full(n, 1.0 / n), QuadratureScheme.UNIFORM_ANGLES_2D, n)


def exact_2d(n_fallback: int = None) -> SphericalQuadrature:
    """Exact scheme: closed forms where available, uniform angles otherwise"""
    n = _even(n_fallback or get_settings().QUAD_UNIFORM_2D, "n_fallback")
    return SphericalQuadrature(_angles(n), np.full(n, 1.0 / n), QuadratureScheme.EXACT_2D, n)


def _antipodal(points: np.ndarray) -> np.ndarray:
    points = points / np.linalg.norm(points, axis=1)[:, None]
    return np.vstack([points, -points])


def spherical_design_3d(n: int) -> SphericalQuadrature:
    """Fibonacci lattice on the upper half plus antipodes"""
    n = _even(n, "n")
    half = n // 2
    k = np.arange(half) + 0.5
    z = 1.0 - k / half  # (0,1]: one hemisphere
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden * np.arange(half)
    rho = np.sqrt(1.0 - z ** 2)
    pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return SphericalQuadrature(_antipodal(pts), np.full(n, 1.0 / n), QuadratureScheme.SPHERICAL_DESIGN_3D, n)


def qmc_sphere(d: int, n: int, seed: int = 0) -> SphericalQuadrature:
    """Scrambled Sobol points through the Gaussian quantile, normalized, plus antipodes"""
    if d < 2:
        raise ValidationError("dimension must be at least 2", field="d")
    n = _even(n, "n")
    half = n // 2
    sampler = qmc.Sobol(d=d, scramble=True, seed=seed)
    m = int(np.log2(half))
    cube = sampler.random_base2(m) if 2 ** m == half else sampler.random(half)
    cube = np.clip(cube, 1e-12, 1.0 - 1e-12)
    gauss = norm.ppf(cube)
    return SphericalQuadrature(_antipodal(gauss), np.full(n, 1.0 / n), QuadratureScheme.QMC, n)


@lru_cache(maxsize=16)
def default_quadrature(d: int) -> SphericalQuadrature:
    settings = get_settings()
    if d == 2:
        return exact_2d(settings.QUAD_UNIFORM_2D)
    if d == 3:
        return spherical_design_3d(settings.QUAD_SPHERE_3D)
    return qmc_sphere(d, settings.QUAD_QMC)


def quadrature_from_config(d: int, scheme: str = None, size: int = None) -> SphericalQuadrature:
    """Build a quadrature from campaign overrides ('exact_2d', 'uniform_angles_2d', ...)"""
    if scheme is None:
        return default_quadrature(d)
    builders = {
        QuadratureScheme.EXACT_2D.value: lambda: exact_2d(size),
        QuadratureScheme.UNIFORM_ANGLES_2D.value: lambda: uniform_angles_2d(size or get_settings().QUAD_UNIFORM_2D),
        QuadratureScheme.SPHERICAL_DESIGN_3D.value: lambda: spherical_design_3d(size or get_settings().QUAD_SPHERE_3D),
        QuadratureScheme.QMC.value: lambda: qmc_sphere(d, size or get_settings().QUAD_QMC),
    }
    if scheme not in builders:
        raise ValidationError(f"unknown quadrature scheme {scheme!r}", field="quadrature.scheme")
    quad = builders[scheme]()
    if quad.dim != d:
        raise ValidationError(f"scheme {scheme} does not match dimension {d}", field="quadrature.scheme")
    return quad
