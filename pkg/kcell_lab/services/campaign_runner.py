# kcell_lab/services/campaign_runner.py
"""
Campaign runner: resolves overrides, dispatches the experiment, writes the
CSV / JSON / SVG outputs and replays earlier runs.
"""

import platform
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import psutil

from kcell_lab.core.config import describe_settings, get_settings
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.campaign import Campaign, ExperimentKind, ResultRow, SuiteReport
from kcell_lab.models.geometry import Window, WindowKind, body_to_dict
from kcell_lab.models.quadrature import SphericalQuadrature
from kcell_lab.services.experiments import ExperimentService
from kcell_lab.services.geometry_service import center_body
from kcell_lab.services.kcell_builder import window_for_body
from kcell_lab.services.quadrature import quadrature_from_config
from kcell_lab.utils.file_handler import ResultsFileHandler
from kcell_lab.utils.svg_plot import plot_gap_csv, plot_survival

logger = LoggerManager.get_logger(__name__)

# experiments whose CSV rows are gap estimates along an n grid
GAP_PLOTS = {
    ExperimentKind.GAP, ExperimentKind.RATE, ExperimentKind.LOWERBOUND,
    ExperimentKind.EXTREMALITY, ExperimentKind.HULLDEFICIT,
}


@dataclass
class RunResult:
    campaign_id: str
    passed: bool
    report: SuiteReport
    seed: int
    outputs: Dict[str, Path] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)


class CampaignRunner:
    """Runs one campaign end to end"""

    def __init__(self, workers: Optional[int] = None):
        self.settings = get_settings()
        self.workers = workers

    def effective_seed(self, campaign: Campaign) -> int:
        """SEED from the environment overrides the config's master_seed"""
        if self.settings.SEED is not None:
            return int(self.settings.SEED)
        return int(campaign.config.master_seed)

    def resolve_quadrature(self, campaign: Campaign) -> SphericalQuadrature:
        q = campaign.config.quadrature
        return quadrature_from_config(campaign.config.d, q.scheme, q.size)

    def resolve_window(self, campaign: Campaign, quad: SphericalQuadrature) -> Optional[Window]:
        w = campaign.config.window
        kind = WindowKind(w.kind)
        if w.radius is not None:
            return Window(kind, w.radius)
        if w.factor is not None or kind is not WindowKind.BALL:
            centered, _ = center_body(campaign.body)
            return window_for_body(centered, kind, w.factor, quad)
        return None

    # ------------------------------------------------------------------------

    def _dispatch(self, campaign: Campaign, service: ExperimentService, seed: int,
                  quad: SphericalQuadrature, window: Optional[Window]) -> Tuple[SuiteReport, Optional[dict]]:
        c = campaign.config
        K, L = campaign.body, campaign.second_body
        kind = c.experiment
        fit = None

        if kind is ExperimentKind.GAP:
            estimates = service.estimate_gap_grid(K, c.n_grid, c.reps, seed, window, quad)
            report = SuiteReport("gap", True, {"estimates": [e.to_dict() for e in estimates]},
                                 [ResultRow.from_gap("gap", e) for e in estimates])
            service.check_monotone(report, estimates)
        elif kind is ExperimentKind.RATE:
            report, _, rate = service.rate_suite(K, c.n_grid, c.reps, seed, c.expected_slope,
                                                 c.slope_tolerance, c.slope_range, c.ratio_band,
                                                 window, quad)
            fit = rate.to_dict()
        elif kind is ExperimentKind.EQUIV:
            r = c.inner_radius if c.inner_radius is not None else 1.0 / (window.radius if window else 4.0)
            report = service.equivalence_suite(c.n_grid[0], r, c.reps, seed, c.d, c.mismatched_radius, quad)
        elif kind is ExperimentKind.CONCAVITY:
            report = service.concavity_suite(K, L, c.alpha_grid, c.reps, seed, c.n_grid[0], window, quad)
        elif kind is ExperimentKind.CONTRACTION:
            report = service.contraction_suite(K, L, c.reps, seed, c.n_grid[0], window, quad)
        elif kind is ExperimentKind.TAIL:
            report = service.tail_suite(K, c.n_grid, c.x_grid, c.reps, seed, c.tail_b,
                                        c.min_tail_count, window, quad)
        elif kind is ExperimentKind.LOWERBOUND:
            report = service.lowerbound_suite(K, c.n_grid, c.reps, seed, c.inflate, True,
                                              c.oracle_points, window, quad)
        elif kind is ExperimentKind.EXTREMALITY:
            report = service.extremality_suite(K, c.n_grid, c.reps, seed, quad)
        elif kind is ExperimentKind.HULLDEFICIT:
            report, rate = service.hull_deficit_suite(c.d, c.n_grid, c.reps, seed, c.slope_tolerance)
            fit = rate.to_dict()
        else:
            report = service.identity_suite(c.n_grid[0], c.reps, seed, c.d, quad)
        return report, fit

    def run(self, campaign: Campaign, out_dir: Optional[Path] = None,
            svg: Optional[bool] = None) -> RunResult:
        config = campaign.config
        seed = self.effective_seed(campaign)
        handler = ResultsFileHandler(out_dir)
        paths = handler.paths_for(config.campaign_id)
        service = ExperimentService(self.workers)

        describe_settings(logger)
        LoggerManager.log_campaign_event(logger, config.campaign_id, "started", {
            "experiment": config.experiment.value, "d": config.d, "reps": config.reps,
            "seed": seed, "workers": service.worker_count(),
        })

        started = time.perf_counter()
        quad = self.resolve_quadrature(campaign)
        window = self.resolve_window(campaign, quad)
        report, fit = self._dispatch(campaign, service, seed, quad, window)
        elapsed = time.perf_counter() - started

        outputs: Dict[str, Path] = {}
        if config.outputs.csv:
            frame = handler.rows_to_frame(campaign, report.rows, seed)
            outputs["csv"] = handler.write_csv(frame, paths["csv"])

        want_svg = config.outputs.svg if svg is None else svg
        if want_svg:
            outputs.update(self._plots(campaign, report, fit, paths, outputs))

        summary = self._summary(campaign, report, fit, seed, service, elapsed, window, quad, outputs, handler)
        if config.outputs.json_summary:
            outputs["json"] = handler.write_summary(summary, paths["json"])

        LoggerManager.log_campaign_event(logger, config.campaign_id, "finished", {
            "passed": report.passed, "failures": report.failures, "wall_time": elapsed,
        })
        for failure in report.failures:
            logger.warning(f"{config.campaign_id}: {failure}")
        return RunResult(config.campaign_id, report.passed, report, seed, outputs, summary)

    def _plots(self, campaign: Campaign, report: SuiteReport, fit: Optional[dict],
               paths: Dict[str, Path], outputs: Dict[str, Path]) -> Dict[str, Path]:
        kind = campaign.config.experiment
        try:
            if kind is ExperimentKind.TAIL:
                curves = report.metrics.get("survival", {})
                return {"svg": plot_survival(report.metrics["x_grid"], curves, paths["svg"],
                                             f"{campaign.campaign_id}: circumradius tail")}
            if kind in GAP_PLOTS and "csv" in outputs:
                return {"svg": plot_gap_csv(outputs["csv"], paths["svg"], fit, campaign.campaign_id)}
        except ValueError as e:
            logger.warning(f"Plot skipped for {campaign.campaign_id}: {e}")
        return {}

    def _summary(self, campaign: Campaign, report: SuiteReport, fit: Optional[dict], seed: int,
                 service: ExperimentService, elapsed: float, window: Optional[Window],
                 quad: SphericalQuadrature, outputs: Dict[str, Path],
                 handler: ResultsFileHandler) -> Dict[str, Any]:
        config = campaign.config
        process = psutil.Process()
        summary = {
            "campaign_id": config.campaign_id,
            "experiment": config.experiment.value,
            "d": config.d,
            "body": body_to_dict(campaign.body),
            "second_body": body_to_dict(campaign.second_body) if campaign.second_body else None,
            "n_grid": list(config.n_grid),
            "reps": config.reps,
            "seed": str(seed),
            "passed": report.passed,
            "report": report.to_dict(),
            "fit": fit,
            "window": window.to_dict() if window else "policy",
            "quadrature": {"scheme": quad.scheme.value, "size": int(quad.nodes.shape[0])},
            "settings": {**self.settings.get_window_config(), **self.settings.get_quadrature_config()},
            "run": {
                "finished_at": datetime.now(timezone.utc).isoformat(),
                "wall_time": elapsed,
                "workers": service.worker_count(),
                "python": platform.python_version(),
                "numpy": np.__version__,
                "cpu_count": psutil.cpu_count(logical=True),
                "rss_mb": round(process.memory_info().rss / 1024 / 1024, 2),
            },
        }
        if "csv" in outputs:
            summary["csv"] = handler.get_file_info(outputs["csv"])
        return summary

    # ------------------------------------------------------------------------

    def replay(self, csv_path: Path, campaign: Campaign) -> RunResult:
        """Re-run into a scratch directory and byte-compare the CSV (raises ReplayMismatch)"""
        csv_path = Path(csv_path)
        with tempfile.TemporaryDirectory(prefix="kcell_replay_") as scratch:
            result = self.run(campaign, Path(scratch), svg=False)
            fresh = result.outputs.get("csv")
            if fresh is None:
                handler = ResultsFileHandler(Path(scratch))
                frame = handler.rows_to_frame(campaign, result.report.rows, result.seed)
                fresh = handler.write_csv(frame, handler.paths_for(campaign.campaign_id)["csv"])
            ResultsFileHandler.compare_bytes(csv_path, fresh)
        LoggerManager.log_campaign_event(logger, campaign.campaign_id, "replay_identical",
                                         {"csv": str(csv_path)})
        return result
