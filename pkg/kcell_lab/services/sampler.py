# kcell_lab/services/sampler.py
"""
Random generation for the restricted isotropic Poisson hyperplane process,
the kappa_0 point process on the unit ball, and the mark process on
S^{d-1} x [0, inf).

Every function draws from a fresh generator of the given RngStream, so the
same (master_seed, stream_id) reproduces the same sample whatever process or
thread runs it.
"""

from typing import Optional, Tuple

import numpy as np
from scipy import stats
from scipy.special import gammaln

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import HitsUnitBall, ValidationError, WindowTooSmall
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.geometry import ConvexBody, Direction, Hyperplane, Window, WindowKind
from kcell_lab.models.quadrature import SphericalQuadrature
from kcell_lab.models.samples import HyperplaneSample, MarkSet, RngStream
from kcell_lab.services.geometry_service import circumradius_origin, support_values
from kcell_lab.services.quadrature import default_quadrature

logger = LoggerManager.get_logger(__name__)


def uniform_directions(gen: np.random.Generator, count: int, d: int) -> np.ndarray:
    """Uniform points on S^{d-1} from normalized Gaussian vectors"""
    g = gen.standard_normal((count, d))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = gen.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


def _window_sup(window: Window, d: int) -> float:
    if window.kind is WindowKind.BALL:
        return window.radius
    return window.radius * np.sqrt(d)


def sample_hyperplanes(K: ConvexBody, window: Window, n: float, rng: RngStream,
                       quad: Optional[SphericalQuadrature] = None,
                       body_width: Optional[float] = None) -> HyperplaneSample:
    """Hyperplanes of an isotropic process of intensity n that miss int K and meet the window.

    The count is Poisson(n (W(window) - W(K))). Given the count, directions
    have density proportional to h(window,u) - h(K,u) (rejection from the
    uniform law; constant for concentric balls) and tau is uniform on
    [h(K,u), h(window,u)].
    """
    if not n > 0:
        raise ValidationError("intensity must be positive", field="n")
    d = K.dim
    quad = quad or default_quadrature(d)
    gap_nodes = window.support_values(quad.nodes) - support_values(K, quad.nodes)
    if np.any(gap_nodes < -get_settings().GEOMETRY_TOL):
        raise WindowTooSmall(float(-gap_nodes.min()))

    if body_width is None:
        from kcell_lab.services.functionals import mean_width
        body_width = mean_width(K, quad)
    expected = n * max(0.0, window.mean_width(d) - body_width)

    gen = rng.generator()
    count = int(gen.poisson(expected))
    bound = _window_sup(window, d) + circumradius_origin(K, quad)

    normals = np.empty((0, d))
    lower = np.empty(0)
    upper = np.empty(0)
    while normals.shape[0] < count:
        need = count - normals.shape[0]
        proposal = uniform_directions(gen, max(need * 2, 16), d)
        lo = support_values(K, proposal)
        hi = window.support_values(proposal)
        accept = gen.random(proposal.shape[0]) * bound < np.maximum(hi - lo, 0.0)
        normals = np.vstack([normals, proposal[accept]])[:count]
        lower = np.concatenate([lower, lo[accept]])[:count]
        upper = np.concatenate([upper, hi[accept]])[:count]

    offsets = lower + gen.random(count) * (upper - lower)
    labels = gen.random(count)
    logger.debug(f"Sampled {count} hyperplanes (expected {expected:.3f})")
    return HyperplaneSample(normals, offsets, labels, window, K, float(n))


def thin_sample(sample: HyperplaneSample, keep_probability: float) -> HyperplaneSample:
    """Poisson thinning by the stored labels: intensity n becomes n * keep_probability"""
    if not 0.0 < keep_probability <= 1.0:
        raise ValidationError("keep probability must lie in (0, 1]", field="keep_probability")
    keep = sample.labels < keep_probability
    return HyperplaneSample(sample.normals[keep], sample.offsets[keep], sample.labels[keep],
                            sample.window, sample.body_ref,
                            sample.intensity * keep_probability, sample.shift)


def sample_kappa0_points(n: float, r: float, rng: RngStream, d: int = 2) -> np.ndarray:
    """Poisson process of intensity n*kappa_0 restricted to B^d minus B_r"""
    if not 0.0 < r < 1.0:
        raise ValidationError("inner radius must lie in (0, 1)", field="r")
    if not n > 0:
        raise ValidationError("intensity must be positive", field="n")
    gen = rng.generator()
    count = int(gen.poisson(n * 2.0 * (1.0 / r - 1.0)))
    directions = uniform_directions(gen, count, d)
    u = gen.random(count)
    radii = 1.0 / (1.0 / r - u * (1.0 / r - 1.0))
    return directions * radii[:, None]


def sample_marks(n: float, t_max: float, rng: RngStream, d: int = 2) -> MarkSet:
    """Poisson process on S^{d-1} x [0, t_max] with intensity 2n sigma x Lebesgue"""
    if not t_max > 0:
        raise ValidationError("t_max must be positive", field="t_max")
    if not n > 0:
        raise ValidationError("intensity must be positive", field="n")
    gen = rng.generator()
    count = int(gen.poisson(2.0 * n * t_max))
    directions = uniform_directions(gen, count, d)
    heights = gen.random(count) * t_max
    return MarkSet(directions, heights, t_max)


def pushforward_delta(H: Hyperplane) -> np.ndarray:
    """Delta(H(u, tau)) = u / tau, orienting H so its halfspace contains o"""
    u, tau = H.normal.coords, H.offset
    if tau < 0:
        u, tau = -u, -tau
    if tau <= 1.0:
        raise HitsUnitBall(tau)
    return u / tau


def pushforward_delta_many(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Vectorized Delta for (m x d) normals and offsets"""
    offsets = np.asarray(offsets, dtype=float)
    sign = np.where(offsets < 0, -1.0, 1.0)
    tau = offsets * sign
    if np.any(tau <= 1.0):
        raise HitsUnitBall(float(tau.min()))
    return normals * (sign / tau)[:, None]


def pullback_delta(x) -> Hyperplane:
    """Inverse of Delta: the point x in B^d minus {o} gives H(x/||x||, 1/||x||)"""
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ValidationError("the origin has no preimage", field="x")
    if norm >= 1.0:
        raise HitsUnitBall(1.0 / norm)
    return Hyperplane(Direction(x / norm), 1.0 / norm)


def unit_ball_volume(d: int) -> float:
    return float(np.exp((d / 2.0) * np.log(np.pi) - gammaln(d / 2.0 + 1.0)))


def sample_lambda0_points(n: float, d: int, rng: RngStream) -> np.ndarray:
    """Poisson process in B^d with intensity n * lambda_0, lambda_0 = (2/omega_d) Lebesgue.

    omega_d = d * kappa_d is the surface area of S^{d-1}, so the total mass is 2n/d.
    """
    gen = rng.generator()
    count = int(gen.poisson(2.0 * n / d))
    directions = uniform_directions(gen, count, d)
    radii = gen.random(count) ** (1.0 / d)
    return directions * radii[:, None]


def poisson_count_gof(counts, mean: float, min_expected: float = 5.0) -> Tuple[float, float]:
    """Chi-square goodness of fit of observed counts against Poisson(mean).

    Cells with small expected frequency are pooled into the two tails.
    Returns (statistic, p-value).
    """
    counts = np.asarray(counts, dtype=int)
    total = counts.size
    if total == 0:
        raise ValidationError("no counts to test", field="counts")
    dist = stats.poisson(mean)
    lo = int(dist.ppf(1e-6))
    hi = int(dist.isf(1e-6)) + 1
    edges = list(range(lo, hi + 1))
    # merge sparse cells from both ends
    probs = dist.pmf(np.arange(lo, hi))
    expected = probs * total
    bins = []
    acc_lo, acc_hi = lo, lo
    acc_mass = 0.0
    for k, e in zip(edges[:-1], expected):
        acc_mass += e
        acc_hi = k
        if acc_mass >= min_expected:
            bins.append((acc_lo, acc_hi))
            acc_lo, acc_mass = k + 1, 0.0
    if acc_mass > 0.0 and bins:
        bins[-1] = (bins[-1][0], acc_hi)
    if len(bins) < 2:
        return 0.0, 1.0
    observed = []
    expect = []
    for i, (a, b) in enumerate(bins):
        lower = -np.inf if i == 0 else a
        upper = np.inf if i == len(bins) - 1 else b
        observed.append(int(np.count_nonzero((counts >= lower) & (counts <= upper))))
        p = dist.cdf(upper) - (dist.cdf(lower - 1) if np.isfinite(lower) else 0.0)
        expect.append(p * total)
    expect = np.asarray(expect)
    expect *= total / expect.sum()
    statistic, p_value = stats.chisquare(observed, expect)
    return float(statistic), float(p_value)
