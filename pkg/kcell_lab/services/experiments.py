# kcell_lab/services/experiments.py
"""
Experiment suites: gap estimation over an intensity grid, rate regression,
and the property suites (equivalence, concavity, contraction, tail,
lower bound, extremality, hull deficit, identities).

Replications are independent tasks keyed by stream id. Chunks of streams are
dispatched to a multiprocessing pool with an order-preserving ``imap``, and
results are folded in stream order, so the numbers do not depend on the
worker count.
"""

import time
from multiprocessing import Pool
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import DegenerateGrid, TruncationLimitExceeded, ValidationError
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.campaign import GapEstimate, RateFit, ResultRow, SuiteReport
from kcell_lab.models.geometry import Ball, ConvexBody, SupportCombo, Window, unit_ball
from kcell_lab.models.quadrature import SphericalQuadrature
from kcell_lab.models.samples import RngStream
from kcell_lab.services.functionals import (
    certify_kt, kappa0_measure, lambda0_deficit, lower_bound_estimate, mean_width,
    pushforward_mass_mc, separating_measure, separating_measure_mc,
)
from kcell_lab.services.geometry_service import (
    center_body, circumradius_origin, hausdorff_directions_2d, hausdorff_distance,
    inradius_origin, support_values,
)
from kcell_lab.services.kcell_builder import (
    build_from_marks, build_kcell, build_kcell_family, build_polar_cell,
    cell_circumradius, mark_height_for, window_for_body,
)
from kcell_lab.services.quadrature import default_quadrature
from kcell_lab.services.sampler import (
    poisson_count_gof, sample_hyperplanes, sample_lambda0_points, sample_marks,
)
from kcell_lab.services.statistics import (
    concave_bends, decay_rate, exceedance_counts, ks_two_sample, ols_fit, standard_error,
    survival_curve,
)

logger = LoggerManager.get_logger(__name__)

KS_LEVEL = 0.01
CONTROL_LEVEL = 0.001
CONCAVITY_TOL = 1e-9


# ----------------------------------------------------------------------------
# Worker functions (module level so the pool can pickle them)
# ----------------------------------------------------------------------------

def _gap_chunk(args):
    K, n_grid, window, quad, body_width, seed, start, stop, want_radius = args
    m = len(n_grid)
    gaps = np.empty((stop - start, m))
    trunc = np.zeros((stop - start, m), dtype=bool)
    radii = np.full((stop - start, m), np.nan)
    widths = np.empty((stop - start, m))
    for row, stream in enumerate(range(start, stop)):
        cells = build_kcell_family(K, n_grid, window, RngStream(seed, stream), quad, body_width)
        for j, cell in enumerate(cells):
            w = mean_width(cell, quad)
            widths[row, j] = w
            gaps[row, j] = w - body_width
            trunc[row, j] = cell.truncated
            if want_radius:
                radii[row, j] = cell_circumradius(cell, quad)
    return gaps, trunc, radii, widths


def _equiv_chunk(args):
    n, r, r_polar, d, quad, seed, start, stop = args
    ball = unit_ball(d)
    window = Window.ball(1.0 / r)
    t_max = mark_height_for(window)
    constructions = 3 + (0 if r_polar is None else 1)
    widths = np.empty((stop - start, constructions))
    radii = np.empty((stop - start, constructions))
    trunc = np.zeros((stop - start, constructions), dtype=bool)
    for row, stream in enumerate(range(start, stop)):
        rng = RngStream(seed, stream)
        cells = [
            build_kcell(ball, n, window, rng.child(0), quad),
            build_from_marks(sample_marks(n, t_max, rng.child(1), d), ball, window, quad),
            build_polar_cell(n, r, rng.child(2), d, quad),
        ]
        if r_polar is not None:
            cells.append(build_polar_cell(n, r_polar, rng.child(2), d, quad))
        for j, cell in enumerate(cells):
            widths[row, j] = mean_width(cell, quad)
            radii[row, j] = cell_circumradius(cell, quad)
            trunc[row, j] = cell.truncated
    return widths, radii, trunc


def _concavity_chunk(args):
    K, L, alphas, n, window, quad, seed, start, stop = args
    d = K.dim
    t_max = mark_height_for(window)
    excess = np.empty((stop - start, len(alphas)))
    for row, stream in enumerate(range(start, stop)):
        eta = sample_marks(n, t_max, RngStream(seed, stream), d)
        w_k = mean_width(build_from_marks(eta, K, window, quad), quad)
        w_l = mean_width(build_from_marks(eta, L, window, quad), quad)
        for j, a in enumerate(alphas):
            M = SupportCombo(((1.0 - a, K), (a, L)))
            w_m = mean_width(build_from_marks(eta, M, window, quad), quad)
            # positive excess = violation of W(P(M_a)) >= (1-a) W(P(K)) + a W(P(L))
            excess[row, j] = (1.0 - a) * w_k + a * w_l - w_m
    return excess


def _contraction_chunk(args):
    K, L, n, window, quad, r, delta, seed, start, stop = args
    d = K.dim
    t_max = mark_height_for(window)
    out = np.empty((stop - start, 4))
    scale = 1.0 + delta / r
    for row, stream in enumerate(range(start, stop)):
        eta = sample_marks(n, t_max, RngStream(seed, stream), d)
        pk = build_from_marks(eta, K, window, quad)
        pl = build_from_marks(eta, L, window, quad)
        rho = max(cell_circumradius(pk, quad), cell_circumradius(pl, quad))
        dist = hausdorff_distance(pk, pl, quad)
        U = quad.nodes
        if d == 2:
            extra = hausdorff_directions_2d(pk, pl)
            U = np.vstack([U, extra]) if extra.size else U
        inclusion = float(np.max(support_values(pl, U) - scale * support_values(pk, U)))
        out[row] = (dist, (rho / r) * delta, inclusion, float(pk.truncated or pl.truncated))
    return out


def _hull_chunk(args):
    n_grid, d, seed, start, stop = args
    out = np.empty((stop - start, len(n_grid)))
    for row, stream in enumerate(range(start, stop)):
        rng = RngStream(seed, stream)
        for j, n in enumerate(n_grid):
            out[row, j] = lambda0_deficit(sample_lambda0_points(n, d, rng.child(j)), d)
    return out


# ----------------------------------------------------------------------------
# Service
# ----------------------------------------------------------------------------

class ExperimentService:
    """Runs replications in stream order and builds reports"""

    def __init__(self, workers: Optional[int] = None):
        self.settings = get_settings()
        self.workers = workers

    # -- plumbing ------------------------------------------------------------

    def worker_count(self) -> int:
        return max(1, int(self.workers or self.settings.WORKERS))

    def _chunks(self, reps: int) -> List[Tuple[int, int]]:
        workers = self.worker_count()
        size = max(1, min(500, -(-reps // (workers * 4))))
        return [(s, min(reps, s + size)) for s in range(0, reps, size)]

    def _run(self, label: str, fn: Callable, make_args: Callable[[int, int], tuple],
             reps: int, n: float = 0.0) -> list:
        """Evaluate fn over stream chunks; results come back in stream order"""
        chunks = self._chunks(reps)
        tasks = [make_args(a, b) for a, b in chunks]
        workers = self.worker_count()
        started = time.perf_counter()
        results = []
        if workers == 1 or len(tasks) == 1:
            iterator = map(fn, tasks)
            pool = None
        else:
            pool = Pool(processes=min(workers, len(tasks)))
            iterator = pool.imap(fn, tasks)
        try:
            for (a, b), result in zip(chunks, iterator):
                results.append(result)
                LoggerManager.log_batch_progress(logger, label, n, b, reps,
                                                 (time.perf_counter() - started) * 1000.0)
        finally:
            if pool is not None:
                pool.close()
                pool.join()
        return results

    @staticmethod
    def _stack(results: list, index: int) -> np.ndarray:
        return np.concatenate([r[index] for r in results], axis=0)

    # -- gap and rate --------------------------------------------------------

    def estimate_gap_grid(self, K: ConvexBody, n_grid: Sequence[float], reps: int, master_seed: int,
                          window: Optional[Window] = None, quad: Optional[SphericalQuadrature] = None,
                          abort: bool = True, with_radius: bool = False,
                          label: str = "gap") -> List[GapEstimate]:
        """E W(Z_K) - W(K) at every n, cells coupled across n by thinning one sample at n_max"""
        if reps < 2:
            raise ValidationError("reps must be at least 2", field="reps")
        n_grid = [float(n) for n in n_grid]
        quad = quad or default_quadrature(K.dim)
        centered, _ = center_body(K)
        window = window or window_for_body(centered, quad=quad)
        body_width = mean_width(K, quad)

        started = time.perf_counter()
        results = self._run(label, _gap_chunk,
                            lambda a, b: (K, n_grid, window, quad, body_width, master_seed, a, b, with_radius),
                            reps, max(n_grid))
        elapsed = time.perf_counter() - started
        gaps, trunc = self._stack(results, 0), self._stack(results, 1)
        self._last_radii = self._stack(results, 2)
        self._last_widths = self._stack(results, 3)

        estimates = []
        for j, n in enumerate(n_grid):
            est = GapEstimate.from_values(n, gaps[:, j], int(trunc[:, j].sum()), elapsed)
            estimates.append(est)
            if est.truncation_frequency > self.settings.TRUNCATION_AUDIT:
                logger.warning(f"Truncation frequency {est.truncation_frequency:.4g} at n={n:g} "
                               f"exceeds the audit level {self.settings.TRUNCATION_AUDIT:g}")
            if abort and est.truncation_frequency > self.settings.TRUNCATION_ABORT:
                raise TruncationLimitExceeded(n, est.truncation_frequency, self.settings.TRUNCATION_ABORT)
        return estimates

    def estimate_gap(self, K: ConvexBody, n: float, reps: int, master_seed: int,
                     window: Optional[Window] = None,
                     quad: Optional[SphericalQuadrature] = None) -> GapEstimate:
        """Single-intensity estimate over streams 0..reps-1"""
        return self.estimate_gap_grid(K, [n], reps, master_seed, window, quad)[0]

    @staticmethod
    def rate_fit(estimates: Sequence[GapEstimate]) -> RateFit:
        """OLS of log(mean_gap) on log(n) with a 95% slope interval"""
        n = np.array([e.n for e in estimates], dtype=float)
        if np.unique(n).size != n.size:
            raise DegenerateGrid("intensity values must be distinct")
        if n.size < 4:
            raise ValidationError("rate fits need at least 4 grid points", field="n_grid")
        gaps = np.array([e.mean_gap for e in estimates], dtype=float)
        if np.any(gaps <= 0):
            raise ValidationError("mean gaps must be positive for a log-log fit", field="mean_gap")
        fit = ols_fit(np.log(n), np.log(gaps))
        return RateFit(fit.slope, fit.intercept, fit.slope_ci_95, n.tolist(), fit.residuals)

    def rate_suite(self, K: ConvexBody, n_grid: Sequence[float], reps: int, master_seed: int,
                   expected_slope: Optional[float] = None, tolerance: float = 0.1,
                   slope_range: Optional[Tuple[float, float]] = None, ratio_band: float = 3.0,
                   window: Optional[Window] = None,
                   quad: Optional[SphericalQuadrature] = None) -> Tuple[SuiteReport, List[GapEstimate], RateFit]:
        estimates = self.estimate_gap_grid(K, n_grid, reps, master_seed, window, quad, label="rate")
        fit = self.rate_fit(estimates)
        report = SuiteReport("rate", True, {"fit": fit.to_dict()},
                             [ResultRow.from_gap("rate", e) for e in estimates])
        if expected_slope is not None:
            report.metrics["expected_slope"] = expected_slope
            report.metrics["slope_tolerance"] = tolerance
            if not fit.contains(expected_slope, tolerance):
                report.fail(f"slope {fit.slope:.4f} outside {expected_slope:.4f} ± {tolerance}")
        if slope_range is not None:
            lo, hi = slope_range
            report.metrics["slope_range"] = [lo, hi]
            if not lo <= fit.slope <= hi:
                report.fail(f"slope {fit.slope:.4f} outside [{lo}, {hi}]")
            # n^{-1} ln n regime: the normalized gap stays within a bounded band
            normalized = [e.mean_gap * e.n / np.log(e.n) for e in estimates]
            spread = max(normalized) / min(normalized)
            report.metrics["normalized_gap_spread"] = spread
            if spread >= ratio_band:
                report.fail(f"mean_gap * n / ln n varies by factor {spread:.3f} >= {ratio_band}")
        self.check_monotone(report, estimates)
        return report, estimates, fit

    @staticmethod
    def check_monotone(report: SuiteReport, estimates: Sequence[GapEstimate]):
        """Gap decreasing along the grid up to 2 stderr noise"""
        for a, b in zip(estimates, estimates[1:]):
            noise = 2.0 * np.hypot(a.stderr, b.stderr)
            if b.mean_gap > a.mean_gap + noise:
                report.fail(f"gap increases from n={a.n:g} to n={b.n:g}")

    # -- equivalence ----------------------------------------------------------

    def equivalence_suite(self, n: float, r: float, reps: int, master_seed: int, d: int = 2,
                          mismatched_r: Optional[float] = None,
                          quad: Optional[SphericalQuadrature] = None) -> SuiteReport:
        """Hyperplane process, mark coupling and polar kappa_0 points give the same law of Z_{B^d}"""
        quad = quad or default_quadrature(d)
        results = self._run("equiv", _equiv_chunk,
                            lambda a, b: (n, r, mismatched_r, d, quad, master_seed, a, b), reps, n)
        widths, radii, trunc = (self._stack(results, i) for i in range(3))
        names = ["process", "marks", "polar"]
        report = SuiteReport("equiv", True)
        means = {}
        for j, name in enumerate(names):
            means[name] = (float(widths[:, j].mean()), standard_error(widths[:, j]))
            report.rows.append(ResultRow(f"equiv:{name}", n, reps, float(widths[:, j].mean() - 2.0),
                                         standard_error(widths[:, j]), int(trunc[:, j].sum())))
        tests = {}
        for i in range(3):
            for j in range(i + 1, 3):
                pair = f"{names[i]}-{names[j]}"
                ks_w = ks_two_sample(widths[:, i], widths[:, j])
                ks_r = ks_two_sample(radii[:, i], radii[:, j])
                tests[pair] = {"width": ks_w.to_dict(), "circumradius": ks_r.to_dict()}
                if ks_w.p_value <= KS_LEVEL:
                    report.fail(f"KS on W(Z) rejects {pair} (p={ks_w.p_value:.3g})")
                if ks_r.p_value <= KS_LEVEL:
                    report.fail(f"KS on R_o(Z) rejects {pair} (p={ks_r.p_value:.3g})")
                (ma, sa), (mb, sb) = means[names[i]], means[names[j]]
                if abs(ma - mb) > 3.0 * np.hypot(sa, sb):
                    report.fail(f"mean W(Z) differs between {pair}")
        report.metrics = {"n": n, "r": r, "reps": reps, "ks": tests,
                          "means": {k: {"mean": m, "stderr": s} for k, (m, s) in means.items()}}
        if mismatched_r is not None:
            control = ks_two_sample(widths[:, 0], widths[:, 3])
            report.metrics["negative_control"] = {"r": mismatched_r, **control.to_dict()}
            if control.p_value >= CONTROL_LEVEL:
                report.fail(f"negative control not detected (p={control.p_value:.3g})")
        return report

    # -- coupling properties --------------------------------------------------

    def concavity_suite(self, K: ConvexBody, L: ConvexBody, alphas: Sequence[float], reps: int,
                        master_seed: int, n: float = 16.0, window: Optional[Window] = None,
                        quad: Optional[SphericalQuadrature] = None) -> SuiteReport:
        """Per-sample W(P(eta, M_a)) >= (1-a) W(P(eta,K)) + a W(P(eta,L)) on shared mark sets"""
        quad = quad or default_quadrature(K.dim)
        K, _ = center_body(K)
        L, _ = center_body(L)
        window = window or self._shared_window(K, L, quad)
        alphas = [float(a) for a in alphas]
        results = self._run("concavity", _concavity_chunk,
                            lambda a, b: (K, L, alphas, n, window, quad, master_seed, a, b), reps, n)
        excess = np.concatenate(results, axis=0)
        report = SuiteReport("concavity", True)
        per_alpha = {}
        for j, a in enumerate(alphas):
            violations = int(np.count_nonzero(excess[:, j] > CONCAVITY_TOL))
            per_alpha[str(a)] = {"violations": violations, "max_excess": float(excess[:, j].max())}
            report.rows.append(ResultRow(f"concavity:{a:g}", n, reps, float(excess[:, j].mean()),
                                         standard_error(excess[:, j]), violations))
            if violations:
                report.fail(f"{violations} violations at alpha={a:g}")
        report.metrics = {"n": n, "tolerance": CONCAVITY_TOL, "alphas": per_alpha}
        return report

    def contraction_suite(self, K: ConvexBody, L: ConvexBody, reps: int, master_seed: int,
                          n: float = 16.0, window: Optional[Window] = None,
                          quad: Optional[SphericalQuadrature] = None) -> SuiteReport:
        """delta(P(eta,K), P(eta,L)) <= (rho/r) delta(K,L) and P(eta,L) ⊆ (1 + delta/r) P(eta,K)"""
        quad = quad or default_quadrature(K.dim)
        K, _ = center_body(K)
        L, _ = center_body(L)
        r = min(inradius_origin(K, quad), inradius_origin(L, quad))
        if not r > 0:
            raise ValidationError("bodies must contain a ball about the origin", field="body")
        delta = hausdorff_distance(K, L, quad)
        window = window or self._shared_window(K, L, quad)
        results = self._run("contraction", _contraction_chunk,
                            lambda a, b: (K, L, n, window, quad, r, delta, master_seed, a, b), reps, n)
        data = np.concatenate(results, axis=0)
        tol = self.settings.GEOMETRY_TOL
        dist_viol = int(np.count_nonzero(data[:, 0] > data[:, 1] + tol))
        incl_viol = int(np.count_nonzero(data[:, 2] > tol))
        truncated = int(data[:, 3].sum())
        report = SuiteReport("contraction", True, {
            "n": n, "r": r, "delta": delta, "distance_violations": dist_viol,
            "inclusion_violations": incl_viol, "truncated": truncated,
            "max_ratio": float(np.max(data[:, 0] / np.maximum(data[:, 1], 1e-300))),
        })
        report.rows.append(ResultRow("contraction", n, reps, float(data[:, 0].mean()),
                                     standard_error(data[:, 0]), truncated))
        if dist_viol:
            report.fail(f"{dist_viol} Hausdorff contraction violations")
        if incl_viol:
            report.fail(f"{incl_viol} scaling inclusion violations")
        return report

    @staticmethod
    def _shared_window(K: ConvexBody, L: ConvexBody, quad: SphericalQuadrature) -> Window:
        radius = max(circumradius_origin(K, quad), circumradius_origin(L, quad))
        return Window.ball(get_settings().WINDOW_FACTOR * max(1.0, radius))

    # -- tail -----------------------------------------------------------------

    @staticmethod
    def check_tail_shape(report: SuiteReport, n: float, x: Sequence[float], survival: Sequence[float],
                         reps: int) -> int:
        """Fail the report unless log-survival is nonincreasing and convex in x; returns the bend count"""
        surv = np.asarray(survival, dtype=float)
        if np.any(np.diff(surv) > 0):
            report.fail(f"survival increases in x at n={n:g}")
        if surv.size and surv[0] > 1.0:
            report.fail(f"survival exceeds 1 at n={n:g}")
        bends = concave_bends(x, surv, reps)
        if bends.size:
            report.fail(f"log-survival is not convex at n={n:g} "
                        f"(x = {', '.join(f'{np.asarray(x)[i]:.3g}' for i in bends)})")
        return int(bends.size)

    def tail_suite(self, K: ConvexBody, n_values: Sequence[float], x_grid: Optional[Sequence[float]],
                   reps: int, master_seed: int, b: float = 1.0, min_tail_count: int = 20,
                   window: Optional[Window] = None,
                   quad: Optional[SphericalQuadrature] = None) -> SuiteReport:
        """Survival P(R_o(Z_K) > b (R_o(K) + x)) per n, exponential decay rate fit on a common range"""
        quad = quad or default_quadrature(K.dim)
        n_values = [float(n) for n in n_values]
        x_grid = np.asarray(x_grid if x_grid is not None else np.linspace(0.0, 2.0, 41), dtype=float)
        centered, _ = center_body(K)
        window = window or window_for_body(centered, quad=quad)
        estimates = self.estimate_gap_grid(K, n_values, reps, master_seed, window, quad,
                                           abort=False, with_radius=True, label="tail")
        radii, widths = self._last_radii, self._last_widths
        ro_k = circumradius_origin(K, quad)
        thresholds = b * (ro_k + x_grid)

        report = SuiteReport("tail", True, rows=[ResultRow.from_gap("tail", e) for e in estimates])
        counts = np.array([exceedance_counts(radii[:, j], thresholds) for j in range(len(n_values))])
        common = np.all(counts >= min_tail_count, axis=0)
        curves, rates, moments, truncated_mean, bends = {}, {}, {}, {}, {}
        for j, n in enumerate(n_values):
            surv = survival_curve(radii[:, j], thresholds)
            curves[str(n)] = surv.tolist()
            # curvature is judged where every n still has enough exceedances
            bends[str(n)] = self.check_tail_shape(report, n, x_grid[common], surv[common], reps)
            moments[str(n)] = [float(np.mean(radii[:, j] ** k)) for k in (1, 2, 3)]
            big = radii[:, j] >= window.radius
            truncated_mean[str(n)] = float(np.mean(widths[:, j] * big))
        if np.count_nonzero(common) < 3:
            report.fail("fewer than 3 common x values with enough exceedances for a decay fit")
        else:
            for j, n in enumerate(n_values):
                rates[str(n)] = -decay_rate(x_grid[common], survival_curve(radii[:, j], thresholds[common])).slope
            for a, c in zip(n_values, n_values[1:]):
                ra, rc = rates[str(a)], rates[str(c)]
                if not ra > 0 or not rc > 0:
                    report.fail(f"non-negative log-survival slope at n={a:g} or n={c:g}")
                    continue
                ratio = rc / ra
                scale = c / a
                # doubling n must multiply the rate by a factor in [1.33, 3]
                lo, hi = scale / 1.5, scale * 1.5
                if not lo <= ratio <= hi:
                    report.fail(f"decay-rate ratio {ratio:.3f} for n {a:g}->{c:g} outside [{lo:.3f}, {hi:.3f}]")
        report.metrics = {
            "b": b, "x_grid": x_grid.tolist(), "common_x": x_grid[common].tolist(),
            "survival": curves, "decay_rates": rates, "moments": moments,
            "truncated_mean": truncated_mean, "concave_bends": bends, "window_radius": window.radius,
        }
        return report

    # -- lower bound -----------------------------------------------------------

    def lowerbound_suite(self, K: ConvexBody, n_grid: Sequence[float], reps: int, master_seed: int,
                         inflate: float = 1.0, certify: bool = True, oracle_points: int = 1_000_000,
                         window: Optional[Window] = None,
                         quad: Optional[SphericalQuadrature] = None) -> SuiteReport:
        """mean_gap + 3 stderr >= 0.98 e^{-1} [W(K[1/n]) - W(K)] at every n"""
        quad = quad or default_quadrature(K.dim)
        estimates = self.estimate_gap_grid(K, n_grid, reps, master_seed, window, quad, label="lowerbound")
        report = SuiteReport("lowerbound", True, rows=[ResultRow.from_gap("lowerbound", e) for e in estimates])
        per_n = {}
        for i, est in enumerate(estimates):
            bound = inflate * lower_bound_estimate(K, est.n, quad)
            entry = {"bound": bound, "mean_gap": est.mean_gap, "stderr": est.stderr}
            if certify:
                value, oracle, ok = certify_kt(K, 1.0 / est.n, quad, 0.01, oracle_points,
                                               RngStream(master_seed, i).child(7))
                entry.update({"kt_gain": value, "kt_oracle": oracle, "certified": ok})
                if not ok:
                    report.fail(f"K[1/n] evaluation not certified at n={est.n:g} ({value:.6g} vs {oracle:.6g})")
            holds = est.mean_gap + 3.0 * est.stderr >= bound * 0.98
            entry["holds"] = holds
            if not holds:
                report.fail(f"lower bound violated at n={est.n:g}")
            per_n[str(est.n)] = entry
        report.metrics = {"inflate": inflate, "per_n": per_n}
        return report

    # -- supplements ------------------------------------------------------------

    def extremality_suite(self, K: ConvexBody, n_grid: Sequence[float], reps: int, master_seed: int,
                          quad: Optional[SphericalQuadrature] = None) -> SuiteReport:
        """E W(Z_K)/W(K) is maximal at balls: compare with the ball of equal mean width"""
        quad = quad or default_quadrature(K.dim)
        width = mean_width(K, quad)
        ball = Ball(np.zeros(K.dim), width / 2.0)
        est_k = self.estimate_gap_grid(K, n_grid, reps, master_seed, None, quad, label="extremality")
        est_b = self.estimate_gap_grid(ball, n_grid, reps, master_seed, None, quad, label="extremality")
        report = SuiteReport("extremality", True)
        ratios = {}
        for ek, eb in zip(est_k, est_b):
            rk = 1.0 + ek.mean_gap / width
            rb = 1.0 + eb.mean_gap / width
            slack = 3.0 * np.hypot(ek.stderr, eb.stderr) / width
            ratios[str(ek.n)] = {"body": rk, "ball": rb, "slack": slack}
            report.rows.append(ResultRow.from_gap("extremality:body", ek))
            report.rows.append(ResultRow.from_gap("extremality:ball", eb))
            if rk > rb + slack:
                report.fail(f"ratio for the body exceeds the ball at n={ek.n:g}")
        report.metrics = {"mean_width": width, "ratios": ratios}
        return report

    def hull_deficit_suite(self, d: int, n_grid: Sequence[float], reps: int, master_seed: int,
                           tolerance: float = 0.15) -> Tuple[SuiteReport, RateFit]:
        """E lambda_0(B^d minus Pi_n) for the Poisson hull of intensity n lambda_0; slope -2/(d+1)"""
        n_grid = [float(n) for n in n_grid]
        results = self._run("hulldeficit", _hull_chunk,
                            lambda a, b: (n_grid, d, master_seed, a, b), reps, max(n_grid))
        data = np.concatenate(results, axis=0)
        estimates = [GapEstimate.from_values(n, data[:, j], 0) for j, n in enumerate(n_grid)]
        fit = self.rate_fit(estimates)
        expected = -2.0 / (d + 1)
        report = SuiteReport("hulldeficit", True, {"fit": fit.to_dict(), "expected_slope": expected},
                             [ResultRow.from_gap("hulldeficit", e) for e in estimates])
        if not fit.contains(expected, tolerance):
            report.fail(f"slope {fit.slope:.4f} outside {expected:.4f} ± {tolerance}")
        return report, fit

    def identity_suite(self, n: float, reps: int, master_seed: int, d: int = 2,
                       quad: Optional[SphericalQuadrature] = None) -> SuiteReport:
        """Separating measure, kappa_0 annulus mass, count law and nesting frequency"""
        quad = quad or default_quadrature(d)
        ball = unit_ball(d)
        double = Ball(np.zeros(d), 2.0)
        report = SuiteReport("identities", True)
        root = RngStream(master_seed, 0)

        exact = separating_measure(ball, double, quad)
        if abs(exact - 2.0) > 1e-12:
            report.fail(f"separating measure of (B, 2B) is {exact!r}, expected 2")
        mc_mean, mc_se = separating_measure_mc(ball, double, Window.ball(3.0), n, reps, root.child(1), quad)
        if abs(mc_mean - exact) > 3.0 * mc_se:
            report.fail(f"Monte Carlo separating measure {mc_mean:.5f} ± {mc_se:.5f} misses {exact}")
        report.rows.append(ResultRow("identities:separating", n, reps, mc_mean, mc_se, 0))

        kappa = kappa0_measure(0.5, 1.0, d)
        push_mean, push_se = pushforward_mass_mc(0.5, 1.0, n, reps, root.child(2), d)
        if abs(push_mean - kappa) > 3.0 * push_se:
            report.fail(f"pushforward mass {push_mean:.5f} ± {push_se:.5f} misses kappa_0 = {kappa}")
        report.rows.append(ResultRow("identities:kappa0", n, reps, push_mean, push_se, 0))

        window = Window.ball(2.0)
        inner = Ball(np.zeros(d), 1.5)
        counts = np.empty(reps, dtype=int)
        hits, total = 0, 0
        stream = root.child(3)
        for i in range(reps):
            sample = sample_hyperplanes(ball, window, n, stream.child(i), quad, body_width=2.0)
            counts[i] = sample.count
            total += sample.count
            if sample.count:
                hits += int(np.count_nonzero(sample.offsets <= support_values(inner, sample.normals)))
        expected_count = n * (window.mean_width(d) - 2.0)
        stat, p_value = poisson_count_gof(counts, expected_count)
        if p_value <= KS_LEVEL:
            report.fail(f"count law rejected (chi2={stat:.3f}, p={p_value:.3g})")
        report.rows.append(ResultRow("identities:count", n, reps, float(counts.mean()),
                                     standard_error(counts), 0))
        p_nest = (mean_width(inner, quad) - 2.0) / (window.mean_width(d) - 2.0)
        freq = hits / total if total else 0.0
        nest_se = np.sqrt(p_nest * (1.0 - p_nest) / max(total, 1))
        if abs(freq - p_nest) > 3.0 * nest_se:
            report.fail(f"nesting frequency {freq:.5f} misses {p_nest:.5f}")

        report.metrics = {
            "separating_exact": exact,
            "separating_mc": {"mean": mc_mean, "stderr": mc_se},
            "kappa0_annulus": kappa,
            "pushforward_mc": {"mean": push_mean, "stderr": push_se},
            "count_gof": {"statistic": stat, "p_value": p_value, "expected": expected_count},
            "nesting": {"frequency": freq, "expected": p_nest, "stderr": float(nest_se)},
        }
        return report
